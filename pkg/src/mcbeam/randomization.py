"""
Gaussian randomization with LP power rescaling.

Candidates are drawn as ``w_g ~ CN(0, W_g)`` from the relaxed optimum,
their powers are re-optimized by a linear program, and the feasible
candidate of lowest sum power is kept.  Candidate ``i`` uses its own
generator seeded by ``(seed, i)`` so a run with ``N`` candidates evaluates
exactly the first ``N`` candidates of any longer run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conic import GE, LE, LpProblem, solve_lp
from .exceptions import RandomizationExhausted
from .model import SystemConfig, evaluate_all_sinr, group_gains

__all__ = [
    "RandomizationOptions",
    "CandidateOutcome",
    "RandomizationResult",
    "covariance_factor",
    "draw_candidate",
    "power_opt_centralized",
    "power_opt_distributed",
    "randomize_centralized",
    "randomize_distributed",
    "meets_targets",
    "respects_caps",
]

FEASIBILITY_TOL = 1e-6


@dataclass(frozen=True)
class RandomizationOptions:
    num_candidates: int = 100
    seed: int = 0
    feasibility_tol: float = FEASIBILITY_TOL

    def __post_init__(self):
        if self.num_candidates < 1:
            raise ValueError("num_candidates must be at least 1")


@dataclass
class CandidateOutcome:
    candidate: np.ndarray
    powers: np.ndarray
    feasible: bool
    objective: float
    index: int = -1

    @property
    def beams(self):
        """Scaled beamformers ``sqrt(p_g) * w_g``."""
        if not self.feasible:
            return None
        return np.sqrt(self.powers)[:, None] * self.candidate


@dataclass
class RandomizationResult:
    best: CandidateOutcome
    lower_bound: float | None
    num_feasible: int
    objectives: np.ndarray = field(repr=False, default=None)


def covariance_factor(W) -> np.ndarray:
    """``F`` with ``F F^H = W`` after clipping negative eigenvalues to zero."""
    ev, vecs = np.linalg.eigh(0.5 * (W + np.conj(W).T))
    return vecs * np.sqrt(np.clip(ev, 0.0, None))


def draw_candidate(cov, rng) -> np.ndarray:
    """
    One candidate beamformer per group, ``w_g = F_g z_g`` with ``z_g ~ CN(0, I)``.

    ``cov`` has shape ``(G, A, A)``; the result has shape ``(G, A)``.
    """
    cov = np.asarray(cov)
    G, A, _ = cov.shape
    out = np.empty((G, A), dtype=complex)
    for g in range(G):
        z = (rng.standard_normal(A) + 1j * rng.standard_normal(A)) / np.sqrt(2.0)
        out[g] = covariance_factor(cov[g]) @ z
    return out


def _norms(candidates):
    return np.sum(np.abs(candidates) ** 2, axis=1)


def _outcome_from_lp(candidate, sol, index=-1):
    if not sol.optimal:
        n = candidate.shape[0]
        return CandidateOutcome(candidate, np.full(n, np.nan), False, float("inf"), index)
    return CandidateOutcome(candidate, sol.x, True, sol.objective, index)


def power_opt_centralized(candidates, channels, config: SystemConfig, index=-1) -> CandidateOutcome:
    """
    Optimal powers for fixed beam directions over the whole network.

    One row per user: ``p_g a_{u,g} - gamma_u sum_{k != g} p_k a_{u,k} >= gamma_u sigma_u^2``
    with ``a_{u,k} = |h_{owner(k),u}^H w_k|^2``.  The cost is the radiated
    power ``sum_g p_g ||w_g||^2``, so unnormalized candidates are ranked
    by what they actually transmit.
    """
    candidates = np.asarray(candidates)
    gains = group_gains(channels, candidates, config)
    gamma = config.sinr_target
    U = config.num_users
    A = -gamma[:, None] * gains
    A[np.arange(U), config.user_group] = gains[np.arange(U), config.user_group]
    sol = solve_lp(LpProblem(A, gamma * config.noise_var, GE, _norms(candidates)))
    return _outcome_from_lp(candidates, sol, index)


def power_opt_distributed(candidates, b, theta, local_channels, config: SystemConfig,
                          index=-1) -> CandidateOutcome:
    """
    Optimal powers of BS ``b`` for fixed beam directions and interference caps.

    The cost is the radiated power of BS ``b``, as in
    :func:`power_opt_centralized`.

    Parameters
    ----------
    candidates : ndarray, shape (G_b, A)
        Directions of the groups of BS ``b``, in the order of ``config.groups_of(b)``.
    theta : ndarray, shape (B, U)
        Interference allocation; ``theta[j, u]`` caps the power BS ``j``
        leaks to user ``u``.  Entries with ``j`` serving ``u`` are ignored.
    local_channels : ndarray, shape (U, A)
        Channels from BS ``b`` to every user (local CSI only).
    """
    candidates = np.asarray(candidates)
    groups = config.groups_of(b)
    served = config.users_of(b)
    others = config.out_of_cell_users(b)
    theta = np.asarray(theta, dtype=float)
    gains = np.abs(np.conj(local_channels) @ candidates.T) ** 2  # (U, G_b)
    col = {g: i for i, g in enumerate(groups)}

    rows, rhs, senses = [], [], []
    for u in served:
        gamma = config.sinr_target[u]
        row = -gamma * gains[u]
        row[col[config.user_group[u]]] = gains[u, col[config.user_group[u]]]
        incoming = theta[:, u].sum() - theta[b, u]
        rows.append(row)
        rhs.append(gamma * (config.noise_var[u] + incoming))
        senses.append(GE)
    for u in others:
        rows.append(gains[u])
        rhs.append(theta[b, u])
        senses.append(LE)
    sol = solve_lp(LpProblem(np.array(rows), rhs, senses, _norms(candidates)))
    return _outcome_from_lp(candidates, sol, index)


def meets_targets(channels, beams, config: SystemConfig, tol=FEASIBILITY_TOL) -> bool:
    """Every SINR at least ``(1 - tol)`` times its target."""
    sinr = evaluate_all_sinr(channels, beams, config)
    return bool(np.all(sinr >= config.sinr_target * (1.0 - tol)))


def respects_caps(channels, beams, config: SystemConfig, theta, tol=FEASIBILITY_TOL) -> bool:
    """
    Leaked power of every BS to every out-of-cell user within its cap.

    The allowance is ``theta * (1 + tol) + tol * sigma_u^2`` so that zero
    caps are judged on the noise scale.
    """
    gains = group_gains(channels, beams, config)  # (U, G)
    theta = np.asarray(theta, dtype=float)
    for b in range(config.num_bs):
        leak = gains[:, config.groups_of(b)].sum(axis=1)
        for u in config.out_of_cell_users(b):
            if leak[u] > theta[b, u] * (1.0 + tol) + tol * config.noise_var[u]:
                return False
    return True


def _candidate_rng(seed, index, *extra):
    return np.random.default_rng([int(seed), int(index), *map(int, extra)])


def _pick_best(outcomes, lower_bound):
    objectives = np.array([o.objective for o in outcomes])
    feasible = [o for o in outcomes if o.feasible]
    if not feasible:
        raise RandomizationExhausted(
            f"all {len(outcomes)} Gaussian candidates were infeasible")
    # argmin returns the first index among ties
    best = outcomes[int(np.argmin(objectives))]
    return RandomizationResult(best, lower_bound, len(feasible), objectives)


def randomize_centralized(cov, channels, config: SystemConfig, opts=None,
                          lower_bound=None) -> RandomizationResult:
    """
    Best of ``opts.num_candidates`` rescaled Gaussian candidates.

    Candidates that fail re-validation against the SINR targets are
    discarded along with LP-infeasible ones.

    Raises
    ------
    RandomizationExhausted
        If no candidate is feasible.
    """
    opts = opts or RandomizationOptions()
    outcomes = []
    for i in range(opts.num_candidates):
        cand = draw_candidate(cov, _candidate_rng(opts.seed, i))
        out = power_opt_centralized(cand, channels, config, index=i)
        if out.feasible and not meets_targets(channels, out.beams, config, opts.feasibility_tol):
            out = CandidateOutcome(cand, out.powers, False, float("inf"), i)
        outcomes.append(out)
    return _pick_best(outcomes, lower_bound)


def randomize_distributed(cov, theta, channels, config: SystemConfig, opts=None,
                          lower_bound=None, on_powers=None) -> RandomizationResult:
    """
    Distributed randomization: every BS rescales its own candidates.

    BS ``b`` draws candidate ``i`` for its groups from a generator seeded by
    ``(seed, i, b)`` and solves its local power LP with the caps ``theta``
    fixed.  The per-BS powers of each candidate are then shared (reported
    through ``on_powers(i, per_bs_powers)``) and the index with the lowest
    network-wide sum is selected.  A candidate index is feasible only if it
    is feasible at every BS.

    ``channels`` is used only through the rows ``channels[b]`` of each BS.
    """
    opts = opts or RandomizationOptions()
    cov = np.asarray(cov)
    G, A = config.num_groups, config.num_antennas
    outcomes = []
    for i in range(opts.num_candidates):
        cand = np.zeros((G, A), dtype=complex)
        powers = np.zeros(G)
        per_bs = np.zeros(config.num_bs)
        ok = True
        for b in range(config.num_bs):
            groups = config.groups_of(b)
            local = draw_candidate(cov[groups], _candidate_rng(opts.seed, i, b))
            out = power_opt_distributed(local, b, theta, channels[b], config, index=i)
            cand[groups] = local
            if not out.feasible:
                ok = False
                per_bs[b] = np.inf
                continue
            powers[groups] = out.powers
            per_bs[b] = out.objective
        if on_powers is not None:
            on_powers(i, per_bs)
        if ok:
            beams = np.sqrt(powers)[:, None] * cand
            ok = meets_targets(channels, beams, config, opts.feasibility_tol) and \
                respects_caps(channels, beams, config, theta, opts.feasibility_tol)
        if ok:
            outcomes.append(CandidateOutcome(cand, powers, True, float(per_bs.sum()), i))
        else:
            outcomes.append(CandidateOutcome(cand, np.full(G, np.nan), False, float("inf"), i))
    return _pick_best(outcomes, lower_bound)
