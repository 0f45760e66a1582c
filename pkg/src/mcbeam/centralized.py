"""
Centralized coordinated multicast beamforming with global CSI.

The QoS problem is relaxed to an SDP over per-group covariances.  When
every optimal covariance has unit rank the principal eigenvectors are the
optimal beamformers; otherwise Gaussian randomization recovers a feasible
rank-one solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import randomization
from .conic import DEFAULT_TOL, GE, SdpProblem, solve_sdp, Status
from .exceptions import InfeasibleError, NumericalFailure
from .model import SystemConfig, sum_power

__all__ = [
    "EPS_RANK",
    "CentralizedResult",
    "build_centralized_sdp",
    "check_rank",
    "extract_rank_one",
    "solve_centralized",
]

#: relative eigenvalue threshold for declaring a covariance rank-deficient
EPS_RANK = 1e-4


@dataclass
class CentralizedResult:
    cov: np.ndarray
    lower_bound: float
    beams: np.ndarray
    achieved_power: float
    all_rank_one: bool
    per_group_rank: np.ndarray
    randomization: randomization.RandomizationResult | None = None


def _channel_outer(h):
    return np.outer(h, h.conj())


def build_centralized_sdp(channels, config: SystemConfig) -> SdpProblem:
    """
    Relaxed QoS problem with the SINR bounds in cleared-denominator form.

    For user ``u`` in group ``g``, the constraint is
    ``Tr(H_{b,u} W_g) - gamma_u sum_{k != g} Tr(H_{owner(k),u} W_k) >= gamma_u sigma_u^2``
    where ``H_{j,u} = h_{j,u} h_{j,u}^H``.  Constraint ``u`` is labelled ``u``.
    """
    h = np.asarray(channels)
    G, A = config.num_groups, config.num_antennas
    prob = SdpProblem([A] * G, block_labels=list(range(G)))
    for u in range(config.num_users):
        g = config.user_group[u]
        gamma = config.sinr_target[u]
        H = {b: _channel_outer(h[b, u]) for b in range(config.num_bs)}
        coeffs = {}
        for k in range(G):
            Hk = H[config.group_owner[k]]
            coeffs[k] = Hk if k == g else -gamma * Hk
        prob.add(coeffs, gamma * config.noise_var[u], GE, label=u)
    return prob


def check_rank(W, eps_rank: float = EPS_RANK) -> int:
    """Number of eigenvalues above ``eps_rank`` times the largest one."""
    ev = np.linalg.eigvalsh(0.5 * (W + np.conj(W).T))
    top = ev[-1]
    if top <= 0:
        return 0
    return int(np.sum(ev > eps_rank * top))


def extract_rank_one(W, eps_rank: float = EPS_RANK) -> np.ndarray:
    """
    Principal component ``sqrt(lambda_1) u_1`` of a unit-rank covariance.

    The phase is fixed so that the first entry of non-negligible magnitude
    is real and positive.

    Raises
    ------
    ValueError
        If ``W`` is zero or has rank above one at threshold ``eps_rank``.
    """
    W = 0.5 * (W + np.conj(W).T)
    rank = check_rank(W, eps_rank)
    if rank == 0:
        raise ValueError("zero covariance has no principal direction")
    if rank > 1:
        raise ValueError(f"covariance has rank {rank}, expected 1")
    ev, vecs = np.linalg.eigh(W)
    w = np.sqrt(ev[-1]) * vecs[:, -1]
    return _fix_phase(w)


def _fix_phase(w):
    mag = np.abs(w)
    idx = int(np.argmax(mag > 1e-8 * mag.max()))
    return w * np.exp(-1j * np.angle(w[idx]))


def solve_relaxation(channels, config: SystemConfig, tol=DEFAULT_TOL):
    """Solve the relaxed SDP and return ``(W, objective)`` or raise."""
    sol = solve_sdp(build_centralized_sdp(channels, config), tol=tol)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleError("QoS problem is infeasible for these channels and targets")
    if sol.status is not Status.OPTIMAL:
        raise NumericalFailure(f"SDP solver stopped with gap {sol.gap:.2e}")
    return np.array(sol.W), sol.objective


def solve_centralized(channels, config: SystemConfig, rand_opts=None,
                      eps_rank: float = EPS_RANK, tol: float = DEFAULT_TOL) -> CentralizedResult:
    """
    Centralized multicast beamforming.

    Solves the relaxation, checks the ranks, and either extracts the
    principal components or falls back to Gaussian randomization.  In the
    rank-one case the extracted directions are passed once through the
    power-allocation LP so that the final beams meet every SINR target
    exactly despite solver round-off.

    Parameters
    ----------
    channels : ndarray, shape (B, U, A)
    config : SystemConfig
    rand_opts : RandomizationOptions, optional
    eps_rank : float
        Relative eigenvalue threshold of the rank test.

    Raises
    ------
    InfeasibleError
        The relaxation (hence the QoS problem) is infeasible.
    RandomizationExhausted
        No randomization candidate could be made feasible.
    """
    rand_opts = rand_opts or randomization.RandomizationOptions()
    W, lower = solve_relaxation(channels, config, tol=tol)
    ranks = np.array([check_rank(Wg, eps_rank) for Wg in W])
    all_one = bool(np.all(ranks == 1))
    rand_result = None
    if all_one:
        directions = np.array([extract_rank_one(Wg, eps_rank) for Wg in W])
        outcome = randomization.power_opt_centralized(directions, channels, config)
        if outcome.feasible:
            beams = outcome.beams
        else:
            beams = directions
    else:
        rand_result = randomization.randomize_centralized(
            W, channels, config, rand_opts, lower_bound=lower)
        beams = rand_result.best.beams
    return CentralizedResult(W, lower, beams, sum_power(beams), all_one, ranks, rand_result)
