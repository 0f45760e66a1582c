"""Exception types raised by the solvers and algorithms."""


class BeamformingError(Exception):
    """Base class for all errors raised by mcbeam."""


class InfeasibleError(BeamformingError):
    """The QoS problem (or one of its relaxations) has no feasible point."""


class NumericalFailure(BeamformingError):
    """The conic solver stopped without reaching the requested accuracy."""


class SubproblemInfeasible(InfeasibleError):
    """A per-BS subproblem stayed infeasible after all backtracking steps."""

    def __init__(self, bs, message=None):
        self.bs = bs
        super().__init__(message or f"subproblem of BS {bs} is infeasible")


class RandomizationExhausted(BeamformingError):
    """None of the Gaussian randomization candidates could be made feasible."""
