"""
Solvers for the two problem classes used throughout the package.

``solve_sdp`` handles trace-minimization problems over Hermitian PSD blocks

    minimize    sum_g Tr(W_g)
    subject to  sum_g Tr(C_{g,m} W_g)  >=  d_m   (or <=)
                W_g  PSD

and returns the optimal covariances together with one nonnegative
Lagrange multiplier per linear constraint.  The multiplier of constraint
``m`` equals ``+d f*/d d_m`` for ``>=`` constraints and ``-d f*/d d_m`` for
``<=`` constraints.

Internally the Lagrange dual

    maximize    d^T y
    subject to  I - sum_m y_m C_{g,m}  PSD   for all g,   y >= 0

is handed to cvxopt's cone LP solver with real symmetric blocks of size
``2A`` (a complex Hermitian ``X + iY`` is embedded as ``[[X, -Y], [Y, X]]``).
The optimal ``W_g`` is read off the PSD-cone multipliers, so the number of
solver variables equals the number of constraints rather than the number
of matrix entries.

``solve_lp`` wraps HiGHS (through :func:`scipy.optimize.linprog`) for the
power-allocation programs ``min sum p`` over ``p >= 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix, solvers
from scipy.optimize import linprog

__all__ = [
    "Status",
    "LinearConstraint",
    "SdpProblem",
    "SdpSolution",
    "LpProblem",
    "LpSolution",
    "solve_sdp",
    "solve_lp",
    "DEFAULT_TOL",
    "GE",
    "LE",
]

DEFAULT_TOL = 1e-8
GE, LE = ">=", "<="


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class LinearConstraint:
    """``sum_g Tr(coeffs[g] W_g) (sense) rhs``; blocks absent from ``coeffs`` have zero coefficient."""

    coeffs: dict
    rhs: float
    sense: str = GE
    label: object = None

    def __post_init__(self):
        if self.sense not in (GE, LE):
            raise ValueError(f"unknown constraint sense {self.sense!r}")


@dataclass
class SdpProblem:
    """Trace minimization over PSD blocks ``W_g`` of size ``block_dims[g]``."""

    block_dims: list
    constraints: list = field(default_factory=list)
    block_labels: list | None = None

    def add(self, coeffs, rhs, sense=GE, label=None):
        self.constraints.append(LinearConstraint(coeffs, float(rhs), sense, label))

    @property
    def num_constraints(self):
        return len(self.constraints)

    def evaluate(self, W):
        """Left-hand side of every constraint at the covariances ``W``."""
        out = np.zeros(self.num_constraints)
        for m, con in enumerate(self.constraints):
            out[m] = sum(np.real(np.vdot(C.conj().T, W[g])) for g, C in con.coeffs.items())
        return out

    def validate(self):
        for m, con in enumerate(self.constraints):
            for g, C in con.coeffs.items():
                n = self.block_dims[g]
                if C.shape != (n, n):
                    raise ValueError(f"constraint {m}: block {g} coefficient has shape {C.shape}")
                scale = max(np.abs(C).max(initial=0.0), 1e-300)
                if np.abs(C - C.conj().T).max(initial=0.0) > 1e-9 * scale:
                    raise ValueError(f"constraint {m}: block {g} coefficient is not Hermitian")


@dataclass
class SdpSolution:
    status: Status
    W: list
    objective: float
    dual: np.ndarray
    dual_objective: float = float("nan")
    gap: float = float("nan")
    iterations: int = 0

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL


@dataclass
class LpProblem:
    """
    ``minimize cost @ x`` subject to ``A[m] @ x (senses[m]) rhs[m]``, ``x >= 0``.

    ``cost`` defaults to all ones (plain ``sum(x)``).
    """

    A: np.ndarray
    rhs: np.ndarray
    senses: list
    cost: np.ndarray | None = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        if isinstance(self.senses, str):
            self.senses = [self.senses] * self.rhs.size
        if self.A.shape[0] != self.rhs.size or len(self.senses) != self.rhs.size:
            raise ValueError("inconsistent LP dimensions")
        if self.cost is None:
            self.cost = np.ones(self.A.shape[1])
        self.cost = np.asarray(self.cost, dtype=float).ravel()
        if self.cost.size != self.A.shape[1] or np.any(self.cost < 0):
            raise ValueError("cost must be a nonnegative vector with one entry per variable")

    @property
    def num_vars(self):
        return self.A.shape[1]


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray
    objective: float
    dual: np.ndarray
    dual_objective: float = float("nan")
    gap: float = float("nan")

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL


def _embed(C):
    return np.block([[C.real, -C.imag], [C.imag, C.real]])


def _unembed(Z):
    n = Z.shape[0] // 2
    Z = 0.5 * (Z + Z.T)
    W = (Z[:n, :n] + Z[n:, n:]) + 1j * (Z[n:, :n] - Z[:n, n:])
    return 0.5 * (W + W.conj().T)


def solve_sdp(problem: SdpProblem, tol: float = DEFAULT_TOL, max_iters: int = 200) -> SdpSolution:
    """
    Solve a trace-minimization SDP.

    Parameters
    ----------
    problem : SdpProblem
    tol : float
        Target relative duality gap and relative feasibility residual.
    max_iters : int
        Interior-point iteration cap.

    Returns
    -------
    SdpSolution
        ``status`` is ``infeasible`` when the dual objective is unbounded
        (no covariances meet the constraints) and ``numerical_failure``
        when the run still falls short after retrying at ``10 * tol`` and
        ``100 * tol``; ``gap`` always reports the achieved relative gap.
    """
    problem.validate()
    face = [k for k, con in enumerate(problem.constraints) if _is_zero_face(con)]
    if face:
        return _solve_on_face(problem, face, tol, max_iters)
    return _solve_core(problem, tol, max_iters)


#: tolerance multipliers tried in turn when the interior-point run stalls
RETRY_FACTORS = (1.0, 10.0, 100.0)


def _solve_core(problem, tol, max_iters):
    # Near-degenerate instances occasionally stall at the tightest settings
    # while converging cleanly a decade looser.
    sol = None
    for factor in RETRY_FACTORS:
        sol = _solve_once(problem, factor * tol, max_iters)
        if sol.status is not Status.NUMERICAL_FAILURE:
            return sol
    return sol


def _is_zero_face(con, rtol=1e-12):
    """``sum Tr(C_g W_g) <= 0`` with every ``C_g`` PSD pins each ``W_g`` to the null space of ``C_g``."""
    if con.sense != LE or con.rhs != 0.0 or not con.coeffs:
        return False
    for C in con.coeffs.values():
        ev = np.linalg.eigvalsh(C)
        if ev[0] < -rtol * max(abs(ev[-1]), 1e-300):
            return False
    return True


def _solve_on_face(problem, face, tol, max_iters):
    # Facial reduction: W_g = N_g V_g N_g^H with N_g spanning the common null
    # space of the PSD coefficients of the zero-RHS constraints.
    bases = []
    for g, n in enumerate(problem.block_dims):
        S = np.zeros((n, n), dtype=complex)
        for k in face:
            C = problem.constraints[k].coeffs.get(g)
            if C is not None:
                S += C
        ev, vecs = np.linalg.eigh(0.5 * (S + S.conj().T))
        keep = ev <= 1e-10 * max(ev[-1], 0.0) if ev[-1] > 0 else np.ones(n, bool)
        bases.append(vecs[:, keep])
    reduced = SdpProblem([N.shape[1] for N in bases], block_labels=problem.block_labels)
    kept = [k for k in range(problem.num_constraints) if k not in face]
    for k in kept:
        con = problem.constraints[k]
        coeffs = {g: bases[g].conj().T @ C @ bases[g] for g, C in con.coeffs.items()
                  if bases[g].shape[1] > 0}
        reduced.add(coeffs, con.rhs, con.sense, con.label)
    sub = _solve_core(reduced, tol, max_iters)
    dims = problem.block_dims
    dual = np.full(problem.num_constraints, np.inf)
    if sub.status is not Status.OPTIMAL:
        if sub.status is Status.INFEASIBLE:
            return _infeasible_sdp(dims, problem.num_constraints)
        return SdpSolution(sub.status, [np.zeros((n, n), complex) for n in dims],
                           sub.objective, np.full(problem.num_constraints, np.nan))
    W = [N @ V @ N.conj().T for N, V in zip(bases, sub.W)]
    # the zero-cap multipliers are unbounded (no finite sensitivity)
    dual[kept] = sub.dual
    return SdpSolution(Status.OPTIMAL, W, sub.objective, dual, sub.dual_objective, sub.gap,
                       sub.iterations)


def _solve_once(problem, tol, max_iters):
    dims = list(problem.block_dims)
    m = problem.num_constraints
    if m == 0:
        W = [np.zeros((n, n), dtype=complex) for n in dims]
        return SdpSolution(Status.OPTIMAL, W, 0.0, np.zeros(0), 0.0, 0.0)

    sign = np.array([1.0 if c.sense == GE else -1.0 for c in problem.constraints])
    d = sign * np.array([c.rhs for c in problem.constraints])

    Gs, hs, active = [], [], []
    for g, n in enumerate(dims):
        if n == 0:
            continue
        Gm = np.zeros((4 * n * n, m))
        used = False
        for k, con in enumerate(problem.constraints):
            C = con.coeffs.get(g)
            if C is not None:
                Gm[:, k] = sign[k] * _embed(np.asarray(C, dtype=complex)).ravel(order="F")
                used = True
        if used:
            Gs.append(matrix(Gm))
            hs.append(matrix(np.eye(2 * n)))
            active.append(g)

    # Constraints with no coefficients at all: 0 >= d_m.
    empty = [k for k, con in enumerate(problem.constraints) if not con.coeffs]
    if any(d[k] > 0 for k in empty):
        return _infeasible_sdp(dims, m)

    opts = {
        "show_progress": False,
        "maxiters": max_iters,
        "abstol": 0.1 * tol,
        "reltol": 0.1 * tol,
        "feastol": 0.1 * tol,
    }
    c = matrix(-d)
    Gl = matrix(-np.eye(m))
    hl = matrix(np.zeros(m))
    try:
        if Gs:
            sol = solvers.sdp(c, Gl=Gl, hl=hl, Gs=Gs, hs=hs, options=opts)
        else:
            sol = solvers.lp(c, Gl, hl, options=opts)
    except (ArithmeticError, ValueError):
        # singular scaling or KKT system inside cvxopt
        return SdpSolution(Status.NUMERICAL_FAILURE, [np.zeros((n, n), complex) for n in dims],
                           float("nan"), np.full(m, np.nan))

    status = sol["status"]
    if status == "dual infeasible":
        return _infeasible_sdp(dims, m)
    if status == "primal infeasible" or sol["x"] is None:
        # y = 0 is always strictly feasible for the LMI, so this only
        # happens through numerical breakdown.
        return SdpSolution(Status.NUMERICAL_FAILURE, [np.zeros((n, n), complex) for n in dims],
                           float("nan"), np.full(m, np.nan))

    y = np.maximum(np.array(sol["x"]).ravel(), 0.0)
    W = [np.zeros((n, n), dtype=complex) for n in dims]
    for Z, g in zip(sol.get("zs", []), active):
        W[g] = _unembed(np.array(Z))
    objective = float(sum(np.trace(Wg).real for Wg in W))
    dual_objective = float(d @ y)
    gap = abs(objective - dual_objective) / max(1.0, abs(objective))

    lhs = sign * problem.evaluate(W)
    scale = np.maximum(1.0, np.abs(d))
    infeas = float(np.max(np.maximum(d - lhs, 0.0) / scale))

    if status == "optimal" or (gap <= tol and infeas <= tol):
        st = Status.OPTIMAL
    elif sol.get("dual objective") is not None and np.isfinite(dual_objective) and \
            dual_objective > 1e6 * max(1.0, abs(objective)):
        return _infeasible_sdp(dims, m)
    else:
        st = Status.NUMERICAL_FAILURE
    return SdpSolution(st, W, objective, y, dual_objective, gap, int(sol.get("iterations", 0)))


def _infeasible_sdp(dims, m):
    return SdpSolution(Status.INFEASIBLE, [np.zeros((n, n), complex) for n in dims],
                       float("inf"), np.full(m, np.nan))


def solve_lp(problem: LpProblem, tol: float = DEFAULT_TOL) -> LpSolution:
    """
    Solve ``min cost @ x`` over ``x >= 0`` with HiGHS.

    ``dual[m] >= 0`` is the multiplier of row ``m`` (sensitivity of the
    optimum to its right-hand side, sign-adjusted as for :func:`solve_sdp`).
    """
    n = problem.num_vars
    sign = np.array([1.0 if s == GE else -1.0 for s in problem.senses])
    # everything as A_ub x <= b_ub
    A_ub = -sign[:, None] * problem.A
    b_ub = -sign * problem.rhs
    res = linprog(problem.cost, A_ub=A_ub, b_ub=b_ub, bounds=[(0, None)] * n,
                  method="highs",
                  options={"primal_feasibility_tolerance": max(tol, 1e-10),
                           "dual_feasibility_tolerance": max(tol, 1e-10)})
    m = problem.rhs.size
    if res.status == 2:
        return LpSolution(Status.INFEASIBLE, np.full(n, np.nan), float("inf"), np.full(m, np.nan))
    if res.status != 0:
        return LpSolution(Status.NUMERICAL_FAILURE, np.full(n, np.nan), float("nan"),
                          np.full(m, np.nan))
    x = np.maximum(res.x, 0.0)
    dual = np.maximum(-res.ineqlin.marginals, 0.0)
    dual_objective = float(sign * problem.rhs @ dual)
    objective = float(problem.cost @ x)
    gap = abs(objective - dual_objective) / max(1.0, abs(objective))
    return LpSolution(Status.OPTIMAL, x, objective, dual, dual_objective, gap)
