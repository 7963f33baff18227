"""Command-line entry point.

Exit codes: 0 success, 1 usage/configuration error, 2 runtime invariant
violation. Log verbosity is controlled only by the WIMAXQOE_LOG env var.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .metrics import (
    ComparisonError,
    MetricsError,
    RunMetrics,
    TraceIntegrityError,
    TraceParseError,
    analyze_trace_file,
    compare,
    metrics_csv,
)
from .runner import export_mobility, run_scenario, write_atomic
from .scenario import ConfigError, ScenarioConfig, golden_config, load_scenario
from .simulation import SimulationInvariantError

logger = logging.getLogger("wimaxqoe")


def _setup_logging() -> None:
    level = os.environ.get("WIMAXQOE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(message)s")


def _load_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.scenario and args.preset:
        raise ConfigError("", "give either --scenario or --preset, not both")
    if args.preset:
        if args.preset != "golden":
            raise ConfigError("", f"unknown preset {args.preset!r}")
        config = golden_config()
    elif args.scenario:
        config = load_scenario(args.scenario)
    else:
        raise ConfigError("", "one of --scenario or --preset is required")
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = args.mode
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    return config


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    artifacts = run_scenario(config, config.mode, args.out)
    logger.info("run complete: %s", artifacts.digest_path)
    print(artifacts.digest_path)
    return 0


def _cmd_export_mobility(args: argparse.Namespace) -> int:
    config = _load_config(args)
    digest = export_mobility(config, args.out, fmt=args.format)
    print(digest)
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    t_start, t_end = 0.0, None
    if args.window:
        t_start, t_end = args.window
    flows = analyze_trace_file(args.trace, t_start, t_end)
    write_atomic(args.csv, metrics_csv(flows))
    if args.json:
        run = RunMetrics(
            mode=args.mode or "unknown",
            seed=args.seed if args.seed is not None else -1,
            config_digest=args.config_digest or "",
            trajectory_digest=args.trajectory_digest or "",
            window=(t_start, t_end if t_end is not None else -1.0),
            flows=flows,
        )
        write_atomic(args.json, json.dumps(run.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    baseline = RunMetrics.load(args.baseline)
    qoe = RunMetrics.load(args.qoe)
    report = compare(baseline, qoe)
    write_atomic(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wimaxqoe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a scenario and write all artifacts")
    run_p.add_argument("--scenario", help="scenario JSON file")
    run_p.add_argument("--preset", help="built-in preset name (golden)")
    run_p.add_argument("--mode", choices=["baseline", "qoe", "both"], help="override the scenario mode")
    run_p.add_argument("--seed", type=int, help="override the scenario seed")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.set_defaults(func=_cmd_run)

    exp_p = sub.add_parser("export-mobility", help="write a standalone mobility trace")
    exp_p.add_argument("--scenario", help="scenario JSON file")
    exp_p.add_argument("--preset", help="built-in preset name (golden)")
    exp_p.add_argument("--seed", type=int, help="override the scenario seed")
    exp_p.add_argument("--format", choices=["ns2", "csv"], default="ns2")
    exp_p.add_argument("--out", required=True, help="output file")
    exp_p.set_defaults(func=_cmd_export_mobility)

    ana_p = sub.add_parser("analyze", help="compute per-flow metrics from a trace file")
    ana_p.add_argument("--trace", required=True)
    ana_p.add_argument("--csv", required=True, help="metrics CSV output path")
    ana_p.add_argument("--json", help="also write a metrics JSON document")
    ana_p.add_argument("--window", nargs=2, type=float, metavar=("T0", "T1"))
    ana_p.add_argument("--mode", help="mode label for the JSON document")
    ana_p.add_argument("--seed", type=int, help="seed label for the JSON document")
    ana_p.add_argument("--config-digest", help="digest label for the JSON document")
    ana_p.add_argument("--trajectory-digest", help="digest label for the JSON document")
    ana_p.set_defaults(func=_cmd_analyze)

    cmp_p = sub.add_parser("compare", help="baseline-vs-qoe comparison report")
    cmp_p.add_argument("--baseline", required=True, help="baseline metrics JSON")
    cmp_p.add_argument("--qoe", required=True, help="qoe metrics JSON")
    cmp_p.add_argument("--out", required=True, help="report JSON output path")
    cmp_p.set_defaults(func=_cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ComparisonError, TraceParseError, MetricsError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SimulationInvariantError, TraceIntegrityError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
