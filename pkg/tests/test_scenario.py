"""Scenario schema: golden preset fidelity, validation errors, digests."""

from __future__ import annotations

import json
from dataclasses import replace

import pytest

from wimaxqoe.mac import ServiceClass
from wimaxqoe.scenario import ConfigError, from_dict, golden_config, load_scenario


def test_golden_preset_traffic_parameters():
    cfg = golden_config()
    assert len(cfg.flows) == 5
    assert [f.packet_size_B for f in cfg.flows] == [200] * 5
    assert [f.interval_s for f in cfg.flows] == [0.0015, 0.001, 0.001, 0.001, 0.0015]
    assert [f.initial_rate_Bps for f in cfg.flows] == [
        200 / 0.0015, 200_000.0, 200_000.0, 200_000.0, 200 / 0.0015]
    assert [f.min_rate_Bps for f in cfg.flows] == [
        120_000.0, 150_000.0, 150_000.0, 150_000.0, 120_000.0]
    assert all(f.priority == 0 for f in cfg.flows)
    assert all(f.service_class is ServiceClass.BE for f in cfg.flows)


def test_golden_preset_cell_parameters():
    cfg = golden_config()
    assert cfg.sim_time_s == 200.0
    assert cfg.speed.v_min_mps == 15.0 and cfg.speed.v_max_mps == 15.0
    assert cfg.channel.rx_power_threshold_W == 2.025e-12
    assert cfg.channel.frequency_Hz == 3.486e9
    assert cfg.channel.bandwidth_Hz == 5e6
    assert cfg.mac.frame_duration_s == 0.005
    assert cfg.mac.queue_limit_pkts == 50
    assert cfg.grid.blocks_x == 3 and cfg.grid.blocks_y == 3 and cfg.grid.block_len_m == 200.0
    assert cfg.bs_position() == (300.0, 300.0)
    assert cfg.qoe.loss_reduction == 0.1  # defaults land in the canonical dict
    assert cfg.canonical_dict()["qoe"]["loss_reduction"] == 0.1


def test_min_rate_above_initial_rate_names_the_flow():
    with pytest.raises(ConfigError) as err:
        from_dict({
            "flows": [
                {"packet_size_B": 200, "interval_s": 0.001, "min_rate_Bps": 150_000.0},
                {"packet_size_B": 200, "interval_s": 0.0015, "min_rate_Bps": 150_000.0},
            ]
        })
    assert "flows[1]" in str(err.value)


def test_exactly_one_rate_key_required():
    base = {"packet_size_B": 200, "min_rate_Bps": 1000.0}
    with pytest.raises(ConfigError):
        from_dict({"flows": [base]})
    with pytest.raises(ConfigError):
        from_dict({"flows": [{**base, "interval_s": 0.01, "initial_rate_Bps": 20_000.0}]})


def test_initial_rate_key_derives_interval():
    cfg = from_dict({"flows": [
        {"packet_size_B": 200, "initial_rate_Bps": 100_000.0, "min_rate_Bps": 50_000.0}]})
    assert cfg.flows[0].interval_s == 0.002


def test_unknown_field_rejected_with_path():
    with pytest.raises(ConfigError) as err:
        from_dict({"flows": [{"packet_size_B": 200, "interval_s": 0.01,
                              "min_rate_Bps": 1000.0, "color": "red"}]})
    assert "color" in str(err.value)
    with pytest.raises(ConfigError):
        from_dict({"flows": [], "warp_drive": True})


def test_structural_validation():
    flow = {"packet_size_B": 200, "interval_s": 0.01, "min_rate_Bps": 1000.0}
    with pytest.raises(ConfigError):
        from_dict({"flows": []})
    with pytest.raises(ConfigError):
        from_dict({"flows": [flow], "sim_time_s": 0})
    with pytest.raises(ConfigError):
        from_dict({"flows": [flow], "mode": "turbo"})
    with pytest.raises(ConfigError):
        from_dict({"flows": [flow], "grid": {"blocks_x": 0}})
    with pytest.raises(ConfigError):
        from_dict({"flows": [flow], "bs_position_m": [1.0]})
    with pytest.raises(ConfigError):
        from_dict({"flows": [flow], "seed": 1.5})
    with pytest.raises(ConfigError):
        from_dict({"flows": [{**flow, "packet_size_B": 0}]})
    with pytest.raises(ConfigError):
        from_dict({"flows": [{**flow, "service_class": "WARP"}]})


def test_non_be_service_class_accepted_by_config():
    cfg = from_dict({"flows": [{"packet_size_B": 200, "interval_s": 0.01,
                                "min_rate_Bps": 1000.0, "service_class": "UGS"}]})
    assert cfg.flows[0].service_class is ServiceClass.UGS


def test_load_scenario_from_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({
        "seed": 9,
        "sim_time_s": 5.0,
        "flows": [{"packet_size_B": 100, "interval_s": 0.01, "min_rate_Bps": 5000.0}],
    }))
    cfg = load_scenario(str(p))
    assert cfg.seed == 9
    assert cfg.flows[0].initial_rate_Bps == 10_000.0


def test_load_scenario_missing_or_invalid_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_scenario(str(bad))


def test_digest_excludes_mode_but_binds_seed():
    cfg = golden_config(seed=1, mode="baseline")
    assert cfg.config_digest() == replace(cfg, mode="qoe").config_digest()
    assert cfg.config_digest() != golden_config(seed=2).config_digest()
    assert cfg.config_digest() != replace(cfg, sim_time_s=100.0).config_digest()


def test_default_bs_position_is_grid_center():
    cfg = from_dict({
        "grid": {"blocks_x": 4, "blocks_y": 2, "block_len_m": 100.0},
        "flows": [{"packet_size_B": 200, "interval_s": 0.01, "min_rate_Bps": 1000.0}],
    })
    assert cfg.bs_position() == (200.0, 100.0)
    custom = from_dict({
        "bs_position_m": [10.0, 20.0],
        "flows": [{"packet_size_B": 200, "interval_s": 0.01, "min_rate_Bps": 1000.0}],
    })
    assert custom.bs_position() == (10.0, 20.0)
