"""Shared scenario factories for the test suite."""

from __future__ import annotations

import pytest

from wimaxqoe.scenario import ScenarioConfig, from_dict


def make_scenario(
    seed: int = 7,
    sim_time: float = 2.0,
    flows: list[dict] | None = None,
    phy_rate: float = 1.5e6,
    q_max: int = 50,
    grid: dict | None = None,
    bs: list[float] | None = None,
    mode: str = "baseline",
    qoe: dict | None = None,
    speed: dict | None = None,
) -> ScenarioConfig:
    if flows is None:
        flows = [
            {"packet_size_B": 200, "interval_s": 0.01, "min_rate_Bps": 10_000.0},
            {"packet_size_B": 200, "interval_s": 0.01, "min_rate_Bps": 10_000.0},
        ]
    d = {
        "seed": seed,
        "sim_time_s": sim_time,
        "mode": mode,
        "grid": grid or {"blocks_x": 2, "blocks_y": 2, "block_len_m": 100.0},
        "mac": {"phy_rate_Bps": phy_rate, "queue_limit_pkts": q_max},
        "flows": flows,
    }
    if bs is not None:
        d["bs_position_m"] = bs
    if qoe is not None:
        d["qoe"] = qoe
    if speed is not None:
        d["speed"] = speed
    return from_dict(d)


@pytest.fixture
def mini_scenario() -> ScenarioConfig:
    """Small lossless run: 2 flows x 200 packets over 2 s."""
    return make_scenario()


@pytest.fixture
def overload_scenario() -> ScenarioConfig:
    """Offered load far above frame capacity, forcing queue_overflow drops."""
    return make_scenario(
        sim_time=2.0,
        flows=[{"packet_size_B": 200, "interval_s": 0.001, "min_rate_Bps": 50_000.0}],
        phy_rate=100_000.0,  # 500 B per 5 ms frame = 2 packets vs 5 arrivals
        q_max=10,
    )


@pytest.fixture
def outage_scenario() -> ScenarioConfig:
    """Base station placed far outside coverage: every grant drops on the channel."""
    return make_scenario(
        sim_time=1.0,
        flows=[{"packet_size_B": 200, "interval_s": 0.005, "min_rate_Bps": 20_000.0}],
        bs=[50_000.0, 50_000.0],
    )
