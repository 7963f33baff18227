"""Run orchestration: executes baseline/qoe simulations, cross-checks the
analysis pipeline against the simulator's own bookkeeping, and writes all
artifacts atomically (trace, metrics CSV/JSON, NS2 mobility export, digest)."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

from . import __version__
from .engine import RNG_ALGORITHM
from .metrics import RunMetrics, analyze_trace_file, compare, metrics_csv
from .mobility import export_trace_csv, export_trace_ns2
from .scenario import ScenarioConfig
from .simulation import (
    Simulation,
    SimulationInvariantError,
    SimulationResult,
    run_mobility_only,
    trajectory_digest,
)


@dataclass(slots=True)
class RunArtifacts:
    out_dir: str
    digest_path: str
    config_digest: str
    trajectory_digest: str
    trace_paths: dict[str, str]
    metrics_csv_paths: dict[str, str]
    metrics_json_paths: dict[str, str]
    mobility_path: str
    comparison_path: str | None
    results: dict[str, SimulationResult]


def write_atomic(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
    os.replace(tmp, path)


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_one_mode(config: ScenarioConfig, mode: str, out_dir: str) -> tuple[SimulationResult, RunMetrics, dict[str, str]]:
    """Simulate one mode, then recompute flow counts from the written trace and
    fail loudly if the two bookkeeping paths disagree."""
    trace_path = os.path.join(out_dir, f"trace_{mode}.log")
    result = Simulation(config, mode, trace_path).run()

    flows = analyze_trace_file(trace_path, 0.0, config.sim_time_s)
    by_id = {m.flow_id: m for m in flows}
    for flow_id, c in result.counts.items():
        m = by_id.get(flow_id)
        if m is None or (m.created, m.delivered, m.dropped, m.residual) != (
            c.created, c.delivered, c.dropped, c.residual
        ):
            raise SimulationInvariantError(
                f"flow {flow_id}: trace-derived counts disagree with simulator bookkeeping"
            )

    run_metrics = RunMetrics(
        mode=mode,
        seed=config.seed,
        config_digest=config.config_digest(),
        trajectory_digest=result.trajectory_digest,
        window=(0.0, config.sim_time_s),
        flows=flows,
    )
    csv_path = os.path.join(out_dir, f"metrics_{mode}.csv")
    json_path = os.path.join(out_dir, f"metrics_{mode}.json")
    write_atomic(csv_path, metrics_csv(flows))
    write_atomic(json_path, json.dumps(run_metrics.to_dict(), indent=2, sort_keys=True) + "\n")
    return result, run_metrics, {"trace": trace_path, "csv": csv_path, "json": json_path}


def run_scenario(config: ScenarioConfig, mode: str, out_dir: str) -> RunArtifacts:
    os.makedirs(out_dir, exist_ok=True)
    modes = ["baseline", "qoe"] if mode == "both" else [mode]

    results: dict[str, SimulationResult] = {}
    metrics: dict[str, RunMetrics] = {}
    paths: dict[str, dict[str, str]] = {}
    for m in modes:
        results[m], metrics[m], paths[m] = run_one_mode(config, m, out_dir)

    if len(modes) == 2:
        if results["baseline"].trajectory_digest != results["qoe"].trajectory_digest:
            raise SimulationInvariantError("baseline and qoe runs diverged in mobility")

    first = results[modes[0]]
    mobility_path = os.path.join(out_dir, "mobility.ns2")
    write_atomic(mobility_path, export_trace_ns2(first.trajectory))

    comparison_path = None
    if len(modes) == 2:
        report = compare(metrics["baseline"], metrics["qoe"])
        comparison_path = os.path.join(out_dir, "comparison.json")
        write_atomic(comparison_path, json.dumps(report, indent=2, sort_keys=True) + "\n")

    digest = {
        "schema_version": 1,
        "code_version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "seed": config.seed,
        "mode": mode,
        "config_digest": config.config_digest(),
        "trajectory_digest": first.trajectory_digest,
        "config": config.canonical_dict(include_mode=True),
        "artifacts": {},
    }
    for m in modes:
        for kind, p in paths[m].items():
            digest["artifacts"][f"{kind}_{m}"] = {"path": os.path.basename(p), "sha256": file_sha256(p)}
    digest["artifacts"]["mobility"] = {"path": os.path.basename(mobility_path), "sha256": file_sha256(mobility_path)}
    if comparison_path:
        digest["artifacts"]["comparison"] = {
            "path": os.path.basename(comparison_path),
            "sha256": file_sha256(comparison_path),
        }
    digest_path = os.path.join(out_dir, "digest.json")
    write_atomic(digest_path, json.dumps(digest, indent=2, sort_keys=True) + "\n")

    return RunArtifacts(
        out_dir=out_dir,
        digest_path=digest_path,
        config_digest=config.config_digest(),
        trajectory_digest=first.trajectory_digest,
        trace_paths={m: paths[m]["trace"] for m in modes},
        metrics_csv_paths={m: paths[m]["csv"] for m in modes},
        metrics_json_paths={m: paths[m]["json"] for m in modes},
        mobility_path=mobility_path,
        comparison_path=comparison_path,
        results=results,
    )


def export_mobility(config: ScenarioConfig, out_path: str, fmt: str = "ns2") -> str:
    """Standalone mobility trace for the configured grid and seed; returns the
    trajectory digest (equal to the digest embedded in run artifacts)."""
    field = run_mobility_only(config)
    exporter = export_trace_ns2 if fmt == "ns2" else export_trace_csv
    write_atomic(out_path, exporter(field.trajectory))
    return trajectory_digest(field.trajectory)
