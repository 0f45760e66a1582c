"""
Coordinated multi-cell multigroup multicast beamforming.

Centralized semidefinite relaxation, a distributed primal-decomposition
variant that exchanges only scalar multipliers over a simulated backhaul,
Gaussian randomization for rank-one recovery, comparison schemes, and a
Monte-Carlo experiment harness.
"""

from .baselines import BaselineResult, boosted_target, interference_nulling, orthogonal_access
from .centralized import (
    EPS_RANK,
    CentralizedResult,
    build_centralized_sdp,
    check_rank,
    extract_rank_one,
    solve_centralized,
    solve_relaxation,
)
from .conic import (
    GE,
    LE,
    LinearConstraint,
    LpProblem,
    LpSolution,
    SdpProblem,
    SdpSolution,
    Status,
    solve_lp,
    solve_sdp,
)
from .distributed import (
    BackhaulLog,
    BackhaulMessage,
    DistributedResult,
    SensitivityBundle,
    SubgradientSchedule,
    build_subproblem,
    extract_sensitivities,
    master_update,
    run_distributed,
    signaling_load,
    solve_subproblem,
    subgradient,
)
from .exceptions import (
    BeamformingError,
    InfeasibleError,
    NumericalFailure,
    RandomizationExhausted,
    SubproblemInfeasible,
)
from .experiments import ExperimentSpec, RankStats, compare_schemes, rank_statistics, run_experiment
from .model import (
    SystemConfig,
    db_to_linear,
    evaluate_all_sinr,
    evaluate_sinr,
    generate_channels,
    linear_to_db,
    sum_power,
)
from .randomization import (
    RandomizationOptions,
    RandomizationResult,
    power_opt_centralized,
    power_opt_distributed,
    randomize_centralized,
    randomize_distributed,
)

__version__ = "0.1.0"
