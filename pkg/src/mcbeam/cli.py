"""
Command-line front end of the experiment harness.

``mcbeam <subcommand> --seed N [--config spec.json] [overrides]``.  Flags
override config values.  On failure the process prints a JSON error
report to stderr and exits with status 1.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    TABLE_I_CONFIGS,
    ExperimentSpec,
    compare_schemes,
    rank_statistics,
    run_experiment,
    signaling_table,
)

__all__ = ["build_parser", "main"]


def _add_common(p):
    p.add_argument("--config", help="JSON file with ExperimentSpec fields")
    p.add_argument("--seed", type=int, required=True, help="base channel seed")
    p.add_argument("--num-seeds", type=int, dest="num_seeds")
    p.add_argument("--scenario", type=int, nargs=4, metavar=("B", "G", "U", "A"))
    p.add_argument("--gamma-db", type=float, nargs="+", dest="gamma_db")
    p.add_argument("--num-candidates", type=int, dest="num_candidates")
    p.add_argument("--eps-rank", type=float, dest="eps_rank")
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir", dest="output_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcbeam", description="Coordinated multi-cell multicast beamforming experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-centralized", help="relaxation plus rank-one recovery with global CSI")
    _add_common(p)

    p = sub.add_parser("run-distributed", help="primal decomposition over a simulated backhaul")
    _add_common(p)
    p.add_argument("--policy", choices=["optimized", "common", "fixed", "nulling"])
    p.add_argument("--fixed-cap", type=float, dest="fixed_cap")
    p.add_argument("--max-rounds", type=int, dest="max_rounds")
    p.add_argument("--step-rule", choices=["normalized", "diminishing", "constant"],
                   dest="rule")
    p.add_argument("--step0", type=float)
    p.add_argument("--convergence-tol", type=float, dest="convergence_tol")
    p.add_argument("--trace", action="store_true", default=None)
    p.add_argument("--backhaul-dump", action="store_true", default=None, dest="backhaul_dump")

    p = sub.add_parser("compare-schemes", help="coordinated vs nulling vs orthogonal access")
    _add_common(p)

    p = sub.add_parser("rank-stats", help="rank-one probability of the relaxation")
    _add_common(p)
    p.add_argument("--users-per-group", type=int, nargs="+", dest="users_per_group")

    p = sub.add_parser("signaling-table", help="backhaul scalars, centralized vs distributed")
    p.add_argument("--configs", nargs="+", metavar="B,U,A",
                   help="e.g. 2,8,8 3,12,12 (default: the three standard configurations)")
    p.add_argument("--output-dir", dest="output_dir")
    return parser


_SPEC_FLAGS = ("num_seeds", "scenario", "gamma_db", "num_candidates", "eps_rank", "workers",
               "output_dir", "policy", "fixed_cap", "trace", "backhaul_dump", "users_per_group")
_SCHEDULE_FLAGS = ("max_rounds", "rule", "step0", "convergence_tol")


def spec_from_args(args, algorithm=None) -> ExperimentSpec:
    """Merge a JSON config with command-line overrides."""
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    for name in _SPEC_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    schedule = dict(data.get("schedule", {}))
    for name in _SCHEDULE_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            schedule[name] = value
    if schedule:
        data["schedule"] = schedule
    data["base_seed"] = args.seed
    if algorithm is not None:
        data["algorithm"] = algorithm
    return ExperimentSpec.from_json(data)


def _paths(result):
    return {k: str(v) for k, v in result["paths"].items()}


def _run(args):
    cmd = args.command
    if cmd == "signaling-table":
        configs = TABLE_I_CONFIGS
        if args.configs:
            configs = [tuple(int(x) for x in c.split(",")) for c in args.configs]
        rows = signaling_table(configs, args.output_dir)
        return {"rows": rows}
    if cmd == "run-centralized":
        res = run_experiment(spec_from_args(args, "centralized"))
        return {"paths": _paths(res), "aggregates": res["aggregates"],
                "num_failures": len(res["failures"])}
    if cmd == "run-distributed":
        res = run_experiment(spec_from_args(args, "distributed"))
        return {"paths": _paths(res), "aggregates": res["aggregates"],
                "num_failures": len(res["failures"])}
    if cmd == "compare-schemes":
        res = compare_schemes(spec_from_args(args))
        return {"paths": _paths(res), "summary": res["summary"],
                "num_failures": len(res["failures"])}
    if cmd == "rank-stats":
        res = rank_statistics(spec_from_args(args))
        return {"paths": _paths(res)}
    raise ValueError(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = _run(args)
    except Exception as exc:  # report every failure in machine-readable form
        report = {"status": "error", "command": args.command, "error": type(exc).__name__,
                  "message": str(exc)}
        print(json.dumps(report), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "command": args.command, **summary}, default=str))
    return 0
