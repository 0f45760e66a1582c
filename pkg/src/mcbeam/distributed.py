"""
Distributed coordinated multicast beamforming via primal decomposition.

Inter-cell interference is bounded by caps ``theta[b, u]`` (power that BS
``b`` may leak to out-of-cell user ``u``).  With the caps fixed, the
relaxed problem splits into one SDP per BS that needs only that BS's own
channel rows.  A master loop moves the caps along a projected subgradient
built from the subproblem multipliers, which the BSs exchange over a
simulated backhaul.

Interference allocations are ``(B, U)`` float arrays.  Entries where ``b``
serves ``u`` carry no meaning and are kept at zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import IO

import numpy as np

from . import randomization
from .centralized import EPS_RANK, check_rank, extract_rank_one
from .conic import DEFAULT_TOL, GE, LE, SdpProblem, SdpSolution, Status, solve_sdp
from .exceptions import NumericalFailure, SubproblemInfeasible
from .model import SystemConfig, sum_power

__all__ = [
    "POLICIES",
    "SubgradientSchedule",
    "SensitivityBundle",
    "BackhaulMessage",
    "BackhaulLog",
    "RoundRecord",
    "DistributedResult",
    "coupling_mask",
    "initial_allocation",
    "build_subproblem",
    "solve_subproblem",
    "extract_sensitivities",
    "subgradient",
    "master_update",
    "run_distributed",
    "signaling_load",
]

POLICIES = ("optimized", "common", "fixed", "nulling")

SINR_DUAL = "sinr_dual"
CAP_DUAL = "cap_dual"
RANK_BIT = "rank_bit"
RAND_POWER = "rand_power"


@dataclass(frozen=True)
class SubgradientSchedule:
    """
    Step-size rule and stopping criteria of the master loop.

    Rules, at round ``r`` with subgradient ``s``:

    * ``normalized``: step length ``step0 / (r + 1)`` along ``s / max|s|``,
      i.e. the largest cap moves by ``step0 / (r + 1)``,
    * ``diminishing``: ``step0 / sqrt(r + 1)``,
    * ``constant``: ``step0``.

    ``step0=None`` resolves to ``mean(theta0)`` for ``normalized`` and to
    ``0.1 * mean(theta0)`` for the other rules.
    """

    rule: str = "normalized"
    step0: float | None = None
    theta_floor: float = 1e-10
    max_rounds: int = 200
    convergence_tol: float = 1e-4
    max_backtracks: int = 20

    def __post_init__(self):
        if self.rule not in ("normalized", "diminishing", "constant"):
            raise ValueError(f"unknown step rule {self.rule!r}")
        if self.step0 is not None and self.step0 <= 0:
            raise ValueError("step0 must be positive")
        if self.theta_floor <= 0:
            raise ValueError("theta_floor must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")

    def step(self, r: int, s=None) -> float:
        """Multiplier of the subgradient ``s`` at round ``r``."""
        if self.step0 is None:
            raise ValueError("step0 unresolved; call resolve() first")
        if self.rule == "constant":
            return self.step0
        if self.rule == "diminishing":
            return self.step0 / np.sqrt(r + 1.0)
        scale = np.abs(np.asarray(s, dtype=float)).max(initial=0.0) if s is not None else 0.0
        if scale == 0.0:
            return 0.0
        return self.step0 / ((r + 1.0) * scale)

    def resolve(self, theta0) -> "SubgradientSchedule":
        if self.step0 is not None:
            return self
        mean = float(np.mean(np.asarray(theta0, dtype=float)))
        factor = 1.0 if self.rule == "normalized" else 0.1
        return replace(self, step0=factor * mean)


@dataclass
class SensitivityBundle:
    """
    Value-function sensitivities known to one BS (or to all of them).

    ``lam[u]``: increase of the serving BS's optimum per unit of incoming
    interference allowance at user ``u``.  ``mu[b, u]``: decrease of BS
    ``b``'s optimum per unit of its cap towards user ``u``.  Entries that
    were not reported are NaN.
    """

    lam: np.ndarray
    mu: np.ndarray

    @classmethod
    def empty(cls, config: SystemConfig):
        return cls(np.full(config.num_users, np.nan),
                   np.full((config.num_bs, config.num_users), np.nan))

    def merge(self, other: "SensitivityBundle") -> "SensitivityBundle":
        lam = np.where(np.isnan(other.lam), self.lam, other.lam)
        mu = np.where(np.isnan(other.mu), self.mu, other.mu)
        return SensitivityBundle(lam, mu)


@dataclass(frozen=True)
class BackhaulMessage:
    round: int
    sender: int
    receiver: int
    kind: str
    user: int | None
    value: float

    def as_dict(self):
        return {"round": self.round, "sender": self.sender, "receiver": self.receiver,
                "kind": self.kind, "user": self.user, "value": self.value}


@dataclass
class BackhaulLog:
    """Record of every scalar sent between BSs."""

    messages: list = field(default_factory=list)

    def send(self, round_, sender, receiver, kind, user, value):
        msg = BackhaulMessage(int(round_), int(sender), int(receiver), kind,
                              None if user is None else int(user), float(value))
        self.messages.append(msg)
        return msg

    def inbox(self, receiver, round_, kind=None):
        return [m for m in self.messages
                if m.receiver == receiver and m.round == round_ and (kind is None or m.kind == kind)]

    def count(self, round_=None, kinds=None) -> int:
        return sum(1 for m in self.messages
                   if (round_ is None or m.round == round_) and (kinds is None or m.kind in kinds))

    def per_round_counts(self) -> dict:
        """Dual-variable scalars exchanged in each subgradient round."""
        out = {}
        for m in self.messages:
            if m.kind in (SINR_DUAL, CAP_DUAL):
                out[m.round] = out.get(m.round, 0) + 1
        return out

    @property
    def cumulative(self) -> int:
        return len(self.messages)

    def dump_jsonl(self, fh: IO[str]):
        for m in self.messages:
            fh.write(json.dumps(m.as_dict(), sort_keys=True) + "\n")


@dataclass
class RoundRecord:
    round: int
    theta: np.ndarray
    per_bs_objective: np.ndarray
    sum_power: float
    theta_change: float = float("nan")


@dataclass
class DistributedResult:
    trace: list
    cov: np.ndarray
    beams: np.ndarray
    achieved_power: float
    relaxed_power: float
    theta: np.ndarray
    backhaul: BackhaulLog
    rounds_used: int
    converged: bool
    rank_one_per_bs: np.ndarray
    per_group_rank: np.ndarray
    policy: str = "optimized"
    randomization: randomization.RandomizationResult | None = None

    @property
    def all_rank_one(self) -> bool:
        return bool(np.all(self.rank_one_per_bs))

    @property
    def sum_power_trace(self) -> np.ndarray:
        return np.array([rec.sum_power for rec in self.trace])


def coupling_mask(config: SystemConfig) -> np.ndarray:
    """``mask[b, u]`` is True when ``u`` is an out-of-cell user of BS ``b``."""
    return config.serving_bs[None, :] != np.arange(config.num_bs)[:, None]


def initial_allocation(config: SystemConfig) -> np.ndarray:
    """Caps at the noise-scaled target, ``theta[b, u] = gamma_u sigma_u^2``."""
    theta = np.broadcast_to(config.sinr_target * config.noise_var,
                            (config.num_bs, config.num_users)).copy()
    return np.where(coupling_mask(config), theta, 0.0)


def _incoming(theta, b, u):
    return float(theta[:, u].sum() - theta[b, u])


def build_subproblem(b: int, theta, local_channels, config: SystemConfig) -> SdpProblem:
    """
    Relaxed beamforming subproblem of BS ``b`` for fixed interference caps.

    Parameters
    ----------
    b : int
    theta : ndarray, shape (B, U)
        Interference allocation.  Served user ``u`` sees the incoming
        allowance ``sum_{j != b} theta[j, u]``; out-of-cell user ``u`` is
        protected by the cap ``theta[b, u]``.
    local_channels : ndarray, shape (U, A)
        The channels ``h_{b, .}`` of this BS only.

    Returns
    -------
    SdpProblem
        Blocks follow ``config.groups_of(b)``.  Constraint labels are
        ``("sinr", u)`` and ``("cap", u)``.
    """
    h = np.asarray(local_channels)
    if h.shape != (config.num_users, config.num_antennas):
        raise ValueError(f"local channels must have shape (U, A), got {h.shape}")
    theta = np.asarray(theta, dtype=float)
    groups = config.groups_of(b)
    A = config.num_antennas
    prob = SdpProblem([A] * len(groups), block_labels=list(groups))
    H = [np.outer(h[u], h[u].conj()) for u in range(config.num_users)]
    for u in config.users_of(b):
        g = config.user_group[u]
        gamma = config.sinr_target[u]
        coeffs = {i: (H[u] if k == g else -gamma * H[u]) for i, k in enumerate(groups)}
        prob.add(coeffs, gamma * (config.noise_var[u] + _incoming(theta, b, u)), GE,
                 label=("sinr", int(u)))
    for u in config.out_of_cell_users(b):
        prob.add({i: H[u] for i in range(len(groups))}, theta[b, u], LE, label=("cap", int(u)))
    return prob


def solve_subproblem(b, theta, local_channels, config, tol=DEFAULT_TOL) -> SdpSolution:
    return solve_sdp(build_subproblem(b, theta, local_channels, config), tol=tol)


def extract_sensitivities(solution: SdpSolution, b: int, config: SystemConfig,
                          problem: SdpProblem | None = None) -> SensitivityBundle:
    """
    Sensitivities of BS ``b``'s optimal value from its solver multipliers.

    The incoming allowance enters the SINR row of user ``u`` as
    ``gamma_u * sum_j theta[j, u]``, so ``lam[u] = gamma_u * y_u``; the cap
    multiplier is ``mu[b, u]`` directly.

    Raises
    ------
    ValueError
        If ``solution`` is not optimal.
    """
    if not solution.optimal:
        raise ValueError(f"cannot extract sensitivities from a {solution.status.value} solution")
    if problem is None:
        labels = [("sinr", int(u)) for u in config.users_of(b)] + \
                 [("cap", int(u)) for u in config.out_of_cell_users(b)]
    else:
        labels = [c.label for c in problem.constraints]
    bundle = SensitivityBundle.empty(config)
    y = np.maximum(np.asarray(solution.dual, dtype=float), 0.0)
    for (kind, u), val in zip(labels, y):
        if kind == "sinr":
            bundle.lam[u] = config.sinr_target[u] * val
        else:
            bundle.mu[b, u] = val
    return bundle


def subgradient(sens: SensitivityBundle, config: SystemConfig) -> np.ndarray:
    """
    ``s[b, u] = lam[u] - mu[b, u]`` on coupled pairs.

    Zero where either term is unknown to the holder of ``sens`` and on
    uncoupled pairs.
    """
    s = sens.lam[None, :] - sens.mu
    known = coupling_mask(config) & ~np.isnan(s)
    return np.where(known, np.nan_to_num(s), 0.0)


def master_update(theta, sens: SensitivityBundle, schedule: SubgradientSchedule, r: int,
                  config: SystemConfig, step_scale: float = 1.0) -> np.ndarray:
    """
    One projected subgradient step on the interference caps.

    ``theta'[b, u] = max(theta[b, u] - step * s[b, u], theta_floor)`` on
    every coupled pair, with ``step = step_scale * schedule.step(r, s)``;
    the normalized rule scales by the largest entry of ``s`` known from
    ``sens``.
    """
    mask = coupling_mask(config)
    s = subgradient(sens, config)
    step = step_scale * schedule.step(r, s[mask])
    new = np.maximum(np.asarray(theta, float) - step * s, schedule.theta_floor)
    return np.where(mask, new, 0.0)


def _common_update(theta, total: SensitivityBundle, schedule, r, config, step_scale=1.0):
    """Shared-cap step along the aggregated subgradient ``sum_{b,u} s[b, u]``."""
    mask = coupling_mask(config)
    agg = float(subgradient(total, config)[mask].sum())
    step = step_scale * schedule.step(r, [agg])
    value = max(float(theta[mask][0]) - step * agg, schedule.theta_floor)
    return np.where(mask, value, 0.0)


def _relative_change(new, old, mask):
    denom = np.abs(old[mask]).max(initial=0.0)
    diff = np.abs(new[mask] - old[mask]).max(initial=0.0)
    if denom == 0.0:
        return 0.0 if diff == 0.0 else np.inf
    return float(diff / denom)


def _solve_all(theta, channels, config, tol):
    probs, sols = [], []
    for b in range(config.num_bs):
        prob = build_subproblem(b, theta, channels[b], config)
        sol = solve_sdp(prob, tol=tol)
        probs.append(prob)
        sols.append(sol)
    return probs, sols


def _first_failure(sols):
    for b, sol in enumerate(sols):
        if not sol.optimal:
            return b, sol.status
    return None, None


def _exchange(log, r, sens_list, config):
    """Route multipliers as backhaul messages; returns the bundle each BS receives."""
    B = config.num_bs
    for b, sens in enumerate(sens_list):
        for u in config.users_of(b):
            for j in range(B):
                if j != b:
                    log.send(r, b, j, SINR_DUAL, u, sens.lam[u])
        for u in config.out_of_cell_users(b):
            log.send(r, b, config.serving_bs[u], CAP_DUAL, u, sens.mu[b, u])


def _bundle_at(log, r, b, own: SensitivityBundle, config):
    """What BS ``b`` knows after round ``r``: its own multipliers plus the inbox."""
    bundle = SensitivityBundle(own.lam.copy(), own.mu.copy())
    for m in log.inbox(b, r):
        if m.kind == SINR_DUAL:
            bundle.lam[m.user] = m.value
        elif m.kind == CAP_DUAL:
            bundle.mu[m.sender, m.user] = m.value
    return bundle


def run_distributed(channels, config: SystemConfig, schedule: SubgradientSchedule | None = None,
                    policy: str = "optimized", fixed_caps=None, rand_opts=None,
                    eps_rank: float = EPS_RANK, tol: float = DEFAULT_TOL,
                    theta0=None) -> DistributedResult:
    """
    Distributed multicast beamforming over a synchronous simulated backhaul.

    Each round every BS solves its subproblem with local CSI, sends its SINR
    multipliers to all other BSs and each cap multiplier to the BS serving
    the protected user, then updates the caps it owns with the projected
    subgradient step.  After the loop the BSs exchange one rank bit each
    and either take principal eigenvectors (re-scaled once by the local
    power LP) or run distributed Gaussian randomization.

    Parameters
    ----------
    channels : ndarray, shape (B, U, A)
        Only ``channels[b]`` is ever handed to BS ``b``.
    policy : {"optimized", "common", "fixed", "nulling"}
        ``common`` drives a single shared cap with the aggregated
        subgradient; ``fixed`` uses ``fixed_caps`` (scalar or ``(B, U)``)
        and ``nulling`` zero caps, both in a single round without any dual
        exchange.
    theta0 : ndarray, optional
        Initial caps for ``optimized``/``common``; defaults to
        :func:`initial_allocation`.

    Raises
    ------
    SubproblemInfeasible
        A subproblem is infeasible in the first round, or stays infeasible
        after ``schedule.max_backtracks`` step halvings.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    channels = np.asarray(channels)
    schedule = schedule or SubgradientSchedule()
    rand_opts = rand_opts or randomization.RandomizationOptions()
    mask = coupling_mask(config)
    B = config.num_bs

    if policy == "nulling":
        theta = np.zeros((B, config.num_users))
    elif policy == "fixed":
        if fixed_caps is None:
            raise ValueError("policy 'fixed' requires fixed_caps")
        theta = np.where(mask, np.broadcast_to(np.asarray(fixed_caps, float), mask.shape), 0.0)
    else:
        theta = initial_allocation(config) if theta0 is None else np.asarray(theta0, float).copy()
        if policy == "common":
            theta = np.where(mask, float(np.mean(theta[mask])) if mask.any() else 0.0, 0.0)
        theta = np.where(mask, np.maximum(theta, schedule.theta_floor), 0.0)
    iterate = policy in ("optimized", "common") and mask.any()
    if iterate:
        schedule = schedule.resolve(theta[mask])

    log = BackhaulLog()
    trace = []
    converged = not iterate
    probs, sols = _solve_all(theta, channels, config, tol)
    bad, status = _first_failure(sols)
    if bad is not None:
        _raise_for(bad, status)

    r = 0
    while True:
        fvals = np.array([s.objective for s in sols])
        record = RoundRecord(r + 1, theta.copy(), fvals, float(fvals.sum()))
        trace.append(record)
        if not iterate:
            break

        sens = [extract_sensitivities(sols[b], b, config, probs[b]) for b in range(B)]
        _exchange(log, r + 1, sens, config)
        views = [_bundle_at(log, r + 1, b, sens[b], config) for b in range(B)]

        def proposal(scale):
            if policy == "common":
                total = views[0]
                for v in views[1:]:
                    total = total.merge(v)
                return _common_update(theta, total, schedule, r, config, scale)
            out = np.zeros_like(theta)
            for b in range(B):
                # BS b owns row b of the allocation
                out[b] = master_update(theta, views[b], schedule, r, config, scale)[b]
            return out

        new_theta = proposal(1.0)
        record.theta_change = _relative_change(new_theta, theta, mask)
        if record.theta_change <= schedule.convergence_tol:
            converged = True
            break
        if r + 1 >= schedule.max_rounds:
            break

        # A failed subproblem at the new caps halves the step from the same
        # point; the current caps are known to be solvable.
        for k in range(schedule.max_backtracks + 1):
            probs_new, sols_new = _solve_all(new_theta, channels, config, tol)
            bad, status = _first_failure(sols_new)
            if bad is None:
                break
            if k == schedule.max_backtracks:
                _raise_for(bad, status, backtracked=True)
            new_theta = proposal(0.5 ** (k + 1))
        theta, probs, sols = new_theta, probs_new, sols_new
        r += 1

    cov = np.zeros((config.num_groups, config.num_antennas, config.num_antennas), dtype=complex)
    for b in range(B):
        cov[config.groups_of(b)] = np.array(sols[b].W)
    ranks = np.array([check_rank(Wg, eps_rank) for Wg in cov])
    rank_one = np.array([bool(np.all(ranks[config.groups_of(b)] == 1)) for b in range(B)])
    final_round = len(trace)
    for b in range(B):
        for j in range(B):
            if j != b:
                log.send(final_round, b, j, RANK_BIT, None, float(rank_one[b]))

    rand_result = None
    if rank_one.all():
        beams = np.zeros((config.num_groups, config.num_antennas), dtype=complex)
        for b in range(B):
            groups = config.groups_of(b)
            directions = np.array([extract_rank_one(Wg, eps_rank) for Wg in cov[groups]])
            out = randomization.power_opt_distributed(directions, b, theta, channels[b], config)
            beams[groups] = out.beams if out.feasible else directions
    else:
        def share(i, per_bs):
            for b in range(B):
                for j in range(B):
                    if j != b:
                        log.send(final_round, b, j, RAND_POWER, None, per_bs[b])

        rand_result = randomization.randomize_distributed(
            cov, theta, channels, config, rand_opts,
            lower_bound=trace[-1].sum_power, on_powers=share)
        beams = rand_result.best.beams

    return DistributedResult(
        trace=trace, cov=cov, beams=beams, achieved_power=sum_power(beams),
        relaxed_power=trace[-1].sum_power, theta=theta, backhaul=log,
        rounds_used=len(trace), converged=converged, rank_one_per_bs=rank_one,
        per_group_rank=ranks, policy=policy, randomization=rand_result)


def _raise_for(b, status, backtracked=False):
    if status is Status.INFEASIBLE:
        extra = " after backtracking" if backtracked else ""
        raise SubproblemInfeasible(b, f"subproblem of BS {b} is infeasible{extra}")
    raise NumericalFailure(f"subproblem of BS {b}: solver status {status.value}")


def signaling_load(config_or_sizes, mode: str = "distributed_per_round", num_users=None,
                   num_antennas=None) -> int:
    """
    Backhaul scalars under equal per-cell user loads.

    ``centralized``: ``2 A U (B - 1) B`` real channel coefficients for
    exchanging all local CSI.  ``distributed_per_round``:
    ``2 B (B - 1) (U / B)`` multipliers per subgradient round.

    Accepts a :class:`SystemConfig` or ``signaling_load(B, mode, U, A)``.

    Raises
    ------
    ValueError
        When ``U`` is not a multiple of ``B``; count the messages of an
        actual :class:`BackhaulLog` instead in that case.
    """
    if isinstance(config_or_sizes, SystemConfig):
        B, _, U, A = config_or_sizes.shape
    else:
        B, U, A = int(config_or_sizes), int(num_users), int(num_antennas)
    if U % B:
        raise ValueError("closed-form signaling load needs U to be a multiple of B")
    if mode == "centralized":
        return 2 * A * U * (B - 1) * B
    if mode == "distributed_per_round":
        return 2 * B * (B - 1) * (U // B)
    raise ValueError(f"unknown mode {mode!r}")
