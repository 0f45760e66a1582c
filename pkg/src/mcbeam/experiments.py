"""
Monte-Carlo experiment harness.

Every experiment is described by an :class:`ExperimentSpec` (loadable from
JSON) and writes plain CSV files.  Seed ``i`` of a run uses channel seed
``base_seed + i`` for every SINR target, so the targets are compared on
common channel realizations.  CSV bodies depend only on the ExperimentSpec, which
makes re-runs byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import interference_nulling, orthogonal_access
from .centralized import EPS_RANK, check_rank, solve_centralized, solve_relaxation
from .distributed import SubgradientSchedule, run_distributed, signaling_load
from .exceptions import BeamformingError
from .model import SystemConfig, generate_channels
from .randomization import RandomizationOptions

__all__ = [
    "PER_SEED_FIELDS",
    "TRACE_FIELDS",
    "ExperimentSpec",
    "RankStats",
    "run_seed",
    "run_experiment",
    "compare_schemes",
    "rank_statistics",
    "signaling_table",
    "aggregate",
    "TABLE_I_CONFIGS",
]

PER_SEED_FIELDS = ["seed", "scheme", "gamma_db", "sum_power_linear", "sum_power_db",
                   "rounds", "all_rank_one", "backhaul_scalars"]
TRACE_FIELDS = ["seed", "round", "sum_power_linear", "theta_change"]
AGGREGATE_FIELDS = ["scheme", "gamma_db", "num_seeds", "mean_sum_power_linear",
                    "mean_sum_power_db", "mean_rounds"]
FAILURE_FIELDS = ["seed", "scheme", "gamma_db", "error"]

TABLE_I_CONFIGS = ((2, 8, 8), (3, 12, 12), (4, 16, 16))


@dataclass
class ExperimentSpec:
    """
    Scenario, SINR grid, seeds and algorithm settings of one experiment.

    ``scenario`` is ``(B, G, U, A)``.  ``users_per_group`` is only used by
    rank statistics, where it overrides ``U`` with ``G * users_per_group``.
    ``schedule`` holds :class:`SubgradientSchedule` keyword arguments.
    """

    scenario: tuple = (2, 4, 8, 8)
    gamma_db: list = field(default_factory=lambda: [0.0])
    num_seeds: int = 100
    base_seed: int = 0
    algorithm: str = "centralized"
    policy: str = "optimized"
    fixed_cap: float | None = None
    schedule: dict = field(default_factory=dict)
    num_candidates: int = 100
    eps_rank: float = EPS_RANK
    users_per_group: list = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    trace: bool = False
    backhaul_dump: bool = False
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        self.scenario = tuple(int(x) for x in self.scenario)
        if len(self.scenario) != 4 or min(self.scenario) < 1:
            raise ValueError("scenario must be four positive integers (B, G, U, A)")
        B, G, U, _ = self.scenario
        if G % B:
            raise ValueError("G must be a multiple of B")
        if U % G:
            raise ValueError("U must be a multiple of G (equal group sizes)")
        self.gamma_db = [float(x) for x in self.gamma_db]
        if not self.gamma_db:
            raise ValueError("gamma_db grid must be non-empty")
        if self.num_seeds < 1:
            raise ValueError("num_seeds must be at least 1")
        if self.algorithm not in ("centralized", "distributed"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        self.users_per_group = [int(x) for x in self.users_per_group]
        if not self.users_per_group:
            raise ValueError("users_per_group grid must be non-empty")
        SubgradientSchedule(**self.schedule)

    @classmethod
    def from_json(cls, path_or_dict):
        if isinstance(path_or_dict, dict):
            data = dict(path_or_dict)
        else:
            with open(path_or_dict) as fh:
                data = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return dataclasses.asdict(self)

    def config(self, gamma_db, num_users=None):
        B, G, U, A = self.scenario
        return SystemConfig.symmetric(B, G, U if num_users is None else num_users, A, gamma_db)

    def seeds(self):
        return [self.base_seed + i for i in range(self.num_seeds)]

    def rand_opts(self, seed):
        return RandomizationOptions(num_candidates=self.num_candidates, seed=seed)


@dataclass
class RankStats:
    """Rank-one probability (%) and mean rank of the higher-rank solutions."""

    users_per_group: int
    gamma_db: float
    num_seeds: int
    rank_one_pct: float
    avg_rank_higher: float | None
    num_failed: int = 0


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, fields, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fields])
    return path


def _db(x):
    return 10.0 * math.log10(x) if x > 0 else float("-inf")


def _row(seed, scheme, gamma_db, power, rounds, rank_one, backhaul):
    return {"seed": seed, "scheme": scheme, "gamma_db": float(gamma_db),
            "sum_power_linear": float(power), "sum_power_db": _db(power),
            "rounds": int(rounds), "all_rank_one": bool(rank_one),
            "backhaul_scalars": int(backhaul)}


def run_seed(spec: ExperimentSpec, gamma_db: float, seed: int) -> dict:
    """
    One channel realization at one SINR target.

    Returns ``{"rows": [...], "trace": [...], "failures": [...],
    "backhaul": [...]}`` with rows in the per-seed CSV schema.
    """
    cfg = spec.config(gamma_db)
    h = generate_channels(cfg, seed)
    out = {"rows": [], "trace": [], "failures": [], "backhaul": []}
    B, _, U, A = cfg.shape
    try:
        if spec.algorithm == "centralized":
            res = solve_centralized(h, cfg, spec.rand_opts(seed), eps_rank=spec.eps_rank)
            csi = 2 * A * U * (B - 1) * B
            out["rows"].append(_row(seed, "centralized", gamma_db, res.achieved_power, 1,
                                    res.all_rank_one, csi))
            out["rows"].append(_row(seed, "sdr_lower_bound", gamma_db, res.lower_bound, 1,
                                    res.all_rank_one, csi))
        else:
            sched = SubgradientSchedule(**spec.schedule)
            res = run_distributed(h, cfg, sched, policy=spec.policy, fixed_caps=spec.fixed_cap,
                                  rand_opts=spec.rand_opts(seed), eps_rank=spec.eps_rank)
            scalars = res.backhaul.cumulative
            out["rows"].append(_row(seed, "distributed", gamma_db, res.achieved_power,
                                    res.rounds_used, res.all_rank_one, scalars))
            out["rows"].append(_row(seed, "distributed_relaxed", gamma_db, res.relaxed_power,
                                    res.rounds_used, res.all_rank_one, scalars))
            if spec.trace:
                out["trace"] = [{"seed": seed, "round": rec.round,
                                 "sum_power_linear": rec.sum_power,
                                 "theta_change": rec.theta_change} for rec in res.trace]
            if spec.backhaul_dump:
                out["backhaul"] = [dict(m.as_dict(), seed=seed) for m in res.backhaul.messages]
    except BeamformingError as exc:
        out["failures"].append({"seed": seed, "scheme": spec.algorithm, "gamma_db": gamma_db,
                                "error": f"{type(exc).__name__}: {exc}"})
    return out


def _map(fn, args, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, *zip(*args)))
    return [fn(*a) for a in args]


def aggregate(rows) -> list:
    """Seed means per (scheme, gamma) in first-seen order."""
    groups = {}
    for row in rows:
        groups.setdefault((row["scheme"], float(row["gamma_db"])), []).append(row)
    out = []
    for (scheme, gamma), items in groups.items():
        p = np.array([float(r["sum_power_linear"]) for r in items])
        rounds = np.array([float(r["rounds"]) for r in items])
        mean = float(np.mean(p))
        out.append({"scheme": scheme, "gamma_db": gamma, "num_seeds": len(items),
                    "mean_sum_power_linear": mean, "mean_sum_power_db": _db(mean),
                    "mean_rounds": float(np.mean(rounds))})
    return out


def _mean_trace(trace_rows):
    by_round = {}
    for row in trace_rows:
        by_round.setdefault(row["round"], []).append(row["sum_power_linear"])
    return [{"round": r, "mean_sum_power_linear": float(np.mean(v)), "num_seeds": len(v)}
            for r, v in sorted(by_round.items())]


def run_experiment(spec: ExperimentSpec) -> dict:
    """
    Run a centralized or distributed experiment over the seed and SINR grid.

    Writes ``per_seed.csv``, ``aggregates.csv`` and ``failures.csv`` to
    ``spec.output_dir``; with ``trace`` on, also ``trace_<gamma>dB.csv``
    (per seed and round) and ``trace_mean_<gamma>dB.csv``; with
    ``backhaul_dump`` on, ``backhaul.jsonl``.

    Returns a dict with the written ``paths`` and the in-memory ``rows``,
    ``aggregates``, ``trace`` and ``failures``.
    """
    out_dir = Path(spec.output_dir)
    args = [(spec, g, s) for g in spec.gamma_db for s in spec.seeds()]
    results = _map(run_seed, args, spec.workers)
    rows = [r for res in results for r in res["rows"]]
    failures = [f for res in results for f in res["failures"]]
    paths = {
        "per_seed": _write_csv(out_dir / "per_seed.csv", PER_SEED_FIELDS, rows),
        "aggregates": _write_csv(out_dir / "aggregates.csv", AGGREGATE_FIELDS, aggregate(rows)),
        "failures": _write_csv(out_dir / "failures.csv", FAILURE_FIELDS, failures),
    }
    traces = {}
    if spec.trace and spec.algorithm == "distributed":
        for g in spec.gamma_db:
            trows = [t for (_, gg, _), res in zip(args, results) if gg == g for t in res["trace"]]
            traces[g] = trows
            tag = f"{g:g}dB"
            paths[f"trace_{tag}"] = _write_csv(out_dir / f"trace_{tag}.csv", TRACE_FIELDS, trows)
            paths[f"trace_mean_{tag}"] = _write_csv(
                out_dir / f"trace_mean_{tag}.csv",
                ["round", "mean_sum_power_linear", "num_seeds"], _mean_trace(trows))
    if spec.backhaul_dump:
        path = out_dir / "backhaul.jsonl"
        with open(path, "w") as fh:
            for res in results:
                for msg in res["backhaul"]:
                    fh.write(json.dumps(msg, sort_keys=True) + "\n")
        paths["backhaul"] = path
    return {"paths": paths, "rows": rows, "aggregates": aggregate(rows), "trace": traces,
            "failures": failures}


def _compare_seed(spec: ExperimentSpec, gamma_db: float, seed: int) -> dict:
    cfg = spec.config(gamma_db)
    h = generate_channels(cfg, seed)
    opts = spec.rand_opts(seed)
    rows, failures = [], []
    try:
        res = solve_centralized(h, cfg, opts, eps_rank=spec.eps_rank)
        rows.append(_row(seed, "coordinated", gamma_db, res.achieved_power, 1, res.all_rank_one, 0))
    except BeamformingError as exc:
        failures.append({"seed": seed, "scheme": "coordinated", "gamma_db": gamma_db,
                         "error": f"{type(exc).__name__}: {exc}"})
    null = interference_nulling(h, cfg, opts, eps_rank=spec.eps_rank)
    if null.feasible:
        rows.append(_row(seed, "nulling", gamma_db, null.sum_power, 1, True, 0))
    else:
        failures.append({"seed": seed, "scheme": "nulling", "gamma_db": gamma_db,
                         "error": "; ".join(null.errors.values())})
    orth = orthogonal_access(h, cfg, opts, eps_rank=spec.eps_rank)
    if orth.feasible:
        rows.append(_row(seed, "orthogonal", gamma_db, orth.sum_power, 1, True, 0))
        rows.append(_row(seed, "orthogonal_slot_sum", gamma_db, orth.slot_sum_power, 1, True, 0))
    else:
        failures.append({"seed": seed, "scheme": "orthogonal", "gamma_db": gamma_db,
                         "error": "; ".join(orth.errors.values())})
    return {"rows": rows, "failures": failures}


COMPARE_FIELDS = ["scheme", "gamma_db", "mean_sum_power_linear", "mean_sum_power_db",
                  "num_seeds", "num_excluded"]


def compare_schemes(spec: ExperimentSpec) -> dict:
    """
    Coordinated, nulling and orthogonal-access power on common seeds.

    A seed is kept at a given target only if every scheme is feasible
    there; ``num_excluded`` counts the others.  Writes ``per_seed.csv``,
    ``failures.csv`` and ``compare.csv`` (``scheme, gamma_db, mean power``).
    """
    out_dir = Path(spec.output_dir)
    args = [(spec, g, s) for g in spec.gamma_db for s in spec.seeds()]
    results = _map(_compare_seed, args, spec.workers)
    rows = [r for res in results for r in res["rows"]]
    failures = [f for res in results for f in res["failures"]]
    schemes = ("coordinated", "nulling", "orthogonal", "orthogonal_slot_sum")
    summary = []
    for g in spec.gamma_db:
        per_seed = {}
        for r in rows:
            if r["gamma_db"] == g:
                per_seed.setdefault(r["seed"], {})[r["scheme"]] = r["sum_power_linear"]
        kept = [s for s in spec.seeds() if set(schemes) <= set(per_seed.get(s, {}))]
        excluded = spec.num_seeds - len(kept)
        for scheme in schemes:
            vals = [per_seed[s][scheme] for s in kept]
            mean = float(np.mean(vals)) if vals else float("nan")
            summary.append({"scheme": scheme, "gamma_db": g, "mean_sum_power_linear": mean,
                            "mean_sum_power_db": _db(mean) if vals else float("nan"),
                            "num_seeds": len(kept), "num_excluded": excluded})
    paths = {
        "per_seed": _write_csv(out_dir / "per_seed.csv", PER_SEED_FIELDS, rows),
        "failures": _write_csv(out_dir / "failures.csv", FAILURE_FIELDS, failures),
        "compare": _write_csv(out_dir / "compare.csv", COMPARE_FIELDS, summary),
    }
    return {"paths": paths, "rows": rows, "summary": summary, "failures": failures}


def _rank_seed(spec: ExperimentSpec, upg: int, gamma_db: float, seed: int):
    B, G, _, _ = spec.scenario
    cfg = spec.config(gamma_db, num_users=G * upg)
    h = generate_channels(cfg, seed)
    try:
        W, _ = solve_relaxation(h, cfg)
    except BeamformingError:
        return None
    return [check_rank(Wg, spec.eps_rank) for Wg in W]


RANK_FIELDS = ["users_per_group", "gamma_db", "num_seeds", "rank_one_pct", "avg_rank_higher",
               "num_failed"]


def rank_statistics(spec: ExperimentSpec) -> dict:
    """
    Tightness of the relaxation over users-per-group and SINR grids.

    For each cell of the grid: the percentage of seeds whose relaxed
    optimum is rank-one in every group, and, over the remaining seeds, the
    mean of ``sum_g rank(W_g) / G`` (``-`` in the CSV when every seed is
    rank-one).  Writes ``rank_stats.csv``.
    """
    args = [(spec, upg, g, s) for upg in spec.users_per_group for g in spec.gamma_db
            for s in spec.seeds()]
    ranks = _map(_rank_seed, args, spec.workers)
    G = spec.scenario[1]
    stats = []
    for upg in spec.users_per_group:
        for g in spec.gamma_db:
            cell = [r for (_, u, gg, _), r in zip(args, ranks) if u == upg and gg == g]
            ok = [np.array(r) for r in cell if r is not None]
            one = [r for r in ok if np.all(r == 1)]
            higher = [r.sum() / G for r in ok if not np.all(r == 1)]
            pct = 100.0 * len(one) / len(ok) if ok else float("nan")
            avg = float(np.mean(higher)) if higher else None
            stats.append(RankStats(upg, g, len(ok), pct, avg, len(cell) - len(ok)))
    rows = [{"users_per_group": s.users_per_group, "gamma_db": s.gamma_db,
             "num_seeds": s.num_seeds, "rank_one_pct": s.rank_one_pct,
             "avg_rank_higher": "-" if s.avg_rank_higher is None else s.avg_rank_higher,
             "num_failed": s.num_failed} for s in stats]
    path = _write_csv(Path(spec.output_dir) / "rank_stats.csv", RANK_FIELDS, rows)
    return {"paths": {"rank_stats": path}, "stats": stats}


SIGNALING_FIELDS = ["num_bs", "num_users", "num_antennas", "centralized",
                    "distributed_per_round", "percent"]


def signaling_table(configs=TABLE_I_CONFIGS, output_dir=None) -> list:
    """Backhaul scalars of the centralized and distributed algorithms per ``(B, U, A)``."""
    rows = []
    for B, U, A in configs:
        cen = signaling_load(B, "centralized", U, A)
        dist = signaling_load(B, "distributed_per_round", U, A)
        rows.append({"num_bs": B, "num_users": U, "num_antennas": A, "centralized": cen,
                     "distributed_per_round": dist, "percent": 100.0 * dist / cen})
    if output_dir is not None:
        _write_csv(Path(output_dir) / "signaling.csv", SIGNALING_FIELDS, rows)
    return rows
