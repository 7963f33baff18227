"""CLI surface: subcommands, artifacts, exit codes, digests."""

from __future__ import annotations

import hashlib
import json
import os

import pytest

from wimaxqoe.cli import main

MINI = {
    "seed": 4,
    "sim_time_s": 2.0,
    "mode": "both",
    "grid": {"blocks_x": 2, "blocks_y": 2, "block_len_m": 100.0},
    "flows": [
        {"packet_size_B": 200, "interval_s": 0.01, "min_rate_Bps": 10000.0},
        {"packet_size_B": 200, "interval_s": 0.02, "min_rate_Bps": 5000.0},
    ],
}


@pytest.fixture
def scenario_file(tmp_path):
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(MINI))
    return str(p)


def sha(path: str) -> str:
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def test_run_both_writes_all_artifacts(scenario_file, tmp_path):
    out = str(tmp_path / "out")
    assert main(["run", "--scenario", scenario_file, "--out", out]) == 0
    for name in ("trace_baseline.log", "trace_qoe.log", "metrics_baseline.csv",
                 "metrics_qoe.csv", "metrics_baseline.json", "metrics_qoe.json",
                 "mobility.ns2", "comparison.json", "digest.json"):
        assert os.path.exists(os.path.join(out, name)), name
    digest = json.load(open(os.path.join(out, "digest.json")))
    assert digest["seed"] == 4
    assert digest["rng_algorithm"] == "MT19937"
    assert digest["config_digest"]
    assert digest["config"]["qoe"]["loss_reduction"] == 0.1
    # artifact hashes recorded in the digest match the files on disk
    for entry in digest["artifacts"].values():
        assert sha(os.path.join(out, entry["path"])) == entry["sha256"]


def test_run_twice_is_byte_identical(scenario_file, tmp_path):
    out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
    assert main(["run", "--scenario", scenario_file, "--out", out1]) == 0
    assert main(["run", "--scenario", scenario_file, "--out", out2]) == 0
    for name in ("trace_baseline.log", "trace_qoe.log", "comparison.json", "digest.json"):
        assert sha(os.path.join(out1, name)) == sha(os.path.join(out2, name)), name


def test_run_baseline_mode_has_no_comparison_or_rate_changes(scenario_file, tmp_path):
    out = str(tmp_path / "out")
    assert main(["run", "--scenario", scenario_file, "--mode", "baseline", "--out", out]) == 0
    assert not os.path.exists(os.path.join(out, "comparison.json"))
    assert not os.path.exists(os.path.join(out, "trace_qoe.log"))
    trace = open(os.path.join(out, "trace_baseline.log")).read()
    assert " rate_change " not in trace


def test_export_mobility_digest_matches_run_digest(scenario_file, tmp_path, capsys):
    out = str(tmp_path / "out")
    assert main(["run", "--scenario", scenario_file, "--out", out]) == 0
    run_digest = json.load(open(os.path.join(out, "digest.json")))["trajectory_digest"]

    mob = str(tmp_path / "mob.ns2")
    assert main(["export-mobility", "--scenario", scenario_file, "--out", mob]) == 0
    printed = capsys.readouterr().out.strip().splitlines()[-1]
    assert printed == run_digest
    # and the file content matches the run's own export
    assert sha(mob) == sha(os.path.join(out, "mobility.ns2"))


def test_export_mobility_seed_changes_digest(scenario_file, tmp_path, capsys):
    d1 = str(tmp_path / "m1.ns2")
    d2 = str(tmp_path / "m2.ns2")
    main(["export-mobility", "--scenario", scenario_file, "--seed", "1", "--out", d1])
    main(["export-mobility", "--scenario", scenario_file, "--seed", "2", "--out", d2])
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] != lines[1]


def test_analyze_reproduces_run_metrics(scenario_file, tmp_path):
    out = str(tmp_path / "out")
    main(["run", "--scenario", scenario_file, "--out", out])
    csv_out = str(tmp_path / "m.csv")
    assert main(["analyze", "--trace", os.path.join(out, "trace_baseline.log"),
                 "--csv", csv_out, "--window", "0", "2.0"]) == 0
    assert open(csv_out).read() == open(os.path.join(out, "metrics_baseline.csv")).read()


def test_compare_from_metrics_files(scenario_file, tmp_path):
    out = str(tmp_path / "out")
    main(["run", "--scenario", scenario_file, "--out", out])
    report_out = str(tmp_path / "report.json")
    assert main(["compare",
                 "--baseline", os.path.join(out, "metrics_baseline.json"),
                 "--qoe", os.path.join(out, "metrics_qoe.json"),
                 "--out", report_out]) == 0
    assert json.load(open(report_out)) == json.load(open(os.path.join(out, "comparison.json")))


def test_comparison_deltas_match_hand_recomputation(scenario_file, tmp_path):
    out = str(tmp_path / "out")
    main(["run", "--scenario", scenario_file, "--out", out])
    base = json.load(open(os.path.join(out, "metrics_baseline.json")))
    qoe = json.load(open(os.path.join(out, "metrics_qoe.json")))
    report = json.load(open(os.path.join(out, "comparison.json")))
    base_flows = {f["flow_id"]: f for f in base["flows"]}
    qoe_flows = {f["flow_id"]: f for f in qoe["flows"]}
    for entry in report["flows"]:
        fid = entry["flow_id"]
        for key in ("avg_throughput_Bps", "plr", "avg_delay_s", "avg_jitter_s"):
            assert entry["deltas"][key] == qoe_flows[fid][key] - base_flows[fid][key]


def test_export_mobility_golden_preset(tmp_path):
    mob = str(tmp_path / "golden.ns2")
    assert main(["export-mobility", "--preset", "golden", "--seed", "3", "--out", mob]) == 0
    text = open(mob).read()
    assert text.startswith("$node_(0) set X_ ")
    assert text.count("setdest") == 5 * 2000  # 5 nodes, t=0 plus 1999 steps of 0.1s


def test_compare_refuses_mismatched_digests(scenario_file, tmp_path):
    out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
    main(["run", "--scenario", scenario_file, "--out", out1])
    main(["run", "--scenario", scenario_file, "--seed", "99", "--out", out2])
    code = main(["compare",
                 "--baseline", os.path.join(out1, "metrics_baseline.json"),
                 "--qoe", os.path.join(out2, "metrics_qoe.json"),
                 "--out", str(tmp_path / "r.json")])
    assert code == 1


def test_config_error_exits_one(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "flows": [{"packet_size_B": 200, "interval_s": 0.0015, "min_rate_Bps": 150000.0}]}))
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--preset", "platinum", "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--scenario", str(tmp_path / "absent.json"), "--out", str(tmp_path / "o")]) == 1


def test_corrupt_trace_exits_two(tmp_path):
    bad = tmp_path / "bad.log"
    bad.write_text("0.000000 create 0 0 200\n0.100000 create 0 0 200\n")
    assert main(["analyze", "--trace", str(bad), "--csv", str(tmp_path / "m.csv")]) == 2


def test_malformed_trace_exits_one(tmp_path):
    bad = tmp_path / "bad.log"
    bad.write_text("0.000000 explode 0 0 200\n")
    assert main(["analyze", "--trace", str(bad), "--csv", str(tmp_path / "m.csv")]) == 1


def test_analyze_optional_json_document(scenario_file, tmp_path):
    out = str(tmp_path / "out")
    main(["run", "--scenario", scenario_file, "--mode", "baseline", "--out", out])
    json_out = str(tmp_path / "m.json")
    assert main(["analyze", "--trace", os.path.join(out, "trace_baseline.log"),
                 "--csv", str(tmp_path / "m.csv"), "--json", json_out,
                 "--window", "0", "2.0", "--mode", "baseline", "--seed", "4"]) == 0
    doc = json.load(open(json_out))
    assert doc["mode"] == "baseline"
    assert doc["seed"] == 4
    assert len(doc["flows"]) == 2
