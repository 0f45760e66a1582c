"""
Conventional schemes used as comparison points.

* Orthogonal access: every BS gets its own time/frequency slot and serves
  its users without inter-cell interference, with per-slot SINR targets
  boosted to keep the user rates unchanged.
* Coordinated interference nulling: all inter-cell interference is forced
  to zero by spatial processing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .centralized import EPS_RANK, solve_centralized
from .distributed import run_distributed
from .exceptions import BeamformingError, InfeasibleError
from .model import SystemConfig

__all__ = [
    "BaselineResult",
    "boosted_target",
    "single_cell_config",
    "orthogonal_access",
    "interference_nulling",
]


@dataclass
class BaselineResult:
    """
    Outcome of a comparison scheme.

    ``sum_power`` is the time-averaged total power for orthogonal access
    (each BS is on air ``1/B`` of the time) and the plain total otherwise;
    ``slot_sum_power`` is the undivided sum of per-slot powers.
    """

    scheme: str
    sum_power: float
    per_cell_power: np.ndarray
    feasible: bool
    beams: np.ndarray | None = None
    slot_sum_power: float = float("nan")
    errors: dict = field(default_factory=dict)


def boosted_target(gamma, num_bs):
    """Per-slot SINR giving ``num_bs`` times the rate: ``(1 + gamma)^B - 1``."""
    return (1.0 + np.asarray(gamma, dtype=float)) ** num_bs - 1.0


def single_cell_config(config: SystemConfig, b: int, sinr_target=None) -> tuple:
    """
    Configuration of BS ``b`` alone, with groups and users renumbered.

    Returns ``(sub_config, groups, users)`` where ``groups`` and ``users``
    map the new indices back to the network ones.
    """
    groups = config.groups_of(b)
    users = config.users_of(b)
    remap = {int(g): i for i, g in enumerate(groups)}
    gamma = config.sinr_target[users] if sinr_target is None else sinr_target
    sub = SystemConfig(
        num_antennas=config.num_antennas,
        group_owner=np.zeros(len(groups), dtype=int),
        user_group=[remap[int(config.user_group[u])] for u in users],
        sinr_target=gamma,
        noise_var=config.noise_var[users],
        num_bs=1,
    )
    return sub, groups, users


def orthogonal_access(channels, config: SystemConfig, rand_opts=None,
                      eps_rank: float = EPS_RANK) -> BaselineResult:
    """
    Single-cell multicast beamforming in orthogonal slots.

    Each BS solves its own relaxed problem with targets
    ``(1 + gamma_u)^B - 1`` and recovers beams as in the centralized
    algorithm.  The reported power is ``(1/B) * sum_b P_b``.
    Per-cell infeasibility is recorded in ``errors`` keyed by BS.
    """
    h = np.asarray(channels)
    B = config.num_bs
    per_cell = np.full(B, np.nan)
    beams = np.zeros((config.num_groups, config.num_antennas), dtype=complex)
    errors = {}
    for b in range(B):
        users = config.users_of(b)
        gamma = boosted_target(config.sinr_target[users], B)
        sub, groups, users = single_cell_config(config, b, gamma)
        try:
            res = solve_centralized(h[b:b + 1, users], sub, rand_opts, eps_rank=eps_rank)
        except BeamformingError as exc:
            errors[b] = f"{type(exc).__name__}: {exc}"
            continue
        per_cell[b] = res.achieved_power
        beams[groups] = res.beams
    feasible = not errors
    slot_sum = float(np.sum(per_cell)) if feasible else float("inf")
    return BaselineResult("orthogonal", slot_sum / B if feasible else float("inf"), per_cell,
                          feasible, beams if feasible else None, slot_sum, errors)


def interference_nulling(channels, config: SystemConfig, rand_opts=None,
                         eps_rank: float = EPS_RANK) -> BaselineResult:
    """
    Coordinated beamforming with zero inter-cell interference.

    Runs the distributed algorithm with every cap fixed at zero: one round,
    no dual exchange.  Infeasible when a BS lacks the spatial degrees of
    freedom to null its out-of-cell users and still serve its own.
    """
    try:
        res = run_distributed(channels, config, policy="nulling", rand_opts=rand_opts,
                              eps_rank=eps_rank)
    except (InfeasibleError, BeamformingError) as exc:
        return BaselineResult("nulling", float("inf"), np.full(config.num_bs, np.nan), False,
                              errors={"all": f"{type(exc).__name__}: {exc}"})
    per_cell = np.array([np.sum(np.abs(res.beams[config.groups_of(b)]) ** 2)
                         for b in range(config.num_bs)])
    return BaselineResult("nulling", res.achieved_power, per_cell, True, res.beams,
                          res.achieved_power)
