"""Convex switching: piecewise-affine value iteration with Monte Carlo bounds.

Backward induction for finite-horizon switching problems whose value
functions are convex piecewise affine in an uncontrolled linear state,
represented exactly as row matrices (value = row maximum), plus
primal-dual simulation diagnostics that bracket the optimum.  The
bundled application is a battery storage trading model on a discrete
charge lattice.
"""

from .battery import (
    SCRAP_MODES,
    ActionSet,
    BatteryLattice,
    BatteryModel,
    DemandModel,
    GridPrices,
    build_battery_model,
    exact_reward,
    expected_excess,
    expected_shortage,
    reward_matrix,
    scrap_matrix,
    transition_probabilities,
)
from .bundle import BundleError, load_bundle, save_bundle
from .config import (
    PRESETS,
    ConfigError,
    Problem,
    RunConfig,
    build_problem,
    describe_config,
    load_config,
)
from .diagnostics import (
    DiagnosticsReport,
    PolicySimulation,
    SweepError,
    martingale_increments,
    primal_dual,
    simulate_policy,
    sweep,
)
from .pwc import (
    FunctionMatrix,
    Grid,
    add,
    affine_matrix,
    compose_linear,
    evaluate,
    max_bind,
    row_rearrange,
    segment_grid,
    subgradient_envelope,
)
from .solver import SolveResult, expected_value_at, policy, solve, value_at
from .stochastic import (
    Ar1Params,
    DisturbanceSampling,
    PathSet,
    SeasonalPrice,
    build_disturbance_sampling,
    make_case_study_price,
    price,
    simulate_paths,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSet",
    "Ar1Params",
    "BatteryLattice",
    "BatteryModel",
    "BundleError",
    "ConfigError",
    "DemandModel",
    "DiagnosticsReport",
    "DisturbanceSampling",
    "FunctionMatrix",
    "Grid",
    "GridPrices",
    "PathSet",
    "PolicySimulation",
    "PRESETS",
    "Problem",
    "RunConfig",
    "SCRAP_MODES",
    "SeasonalPrice",
    "SolveResult",
    "SweepError",
    "add",
    "affine_matrix",
    "build_battery_model",
    "build_disturbance_sampling",
    "build_problem",
    "compose_linear",
    "describe_config",
    "evaluate",
    "exact_reward",
    "expected_excess",
    "expected_shortage",
    "expected_value_at",
    "load_bundle",
    "load_config",
    "make_case_study_price",
    "martingale_increments",
    "max_bind",
    "policy",
    "price",
    "primal_dual",
    "reward_matrix",
    "row_rearrange",
    "save_bundle",
    "scrap_matrix",
    "segment_grid",
    "simulate_paths",
    "simulate_policy",
    "solve",
    "subgradient_envelope",
    "sweep",
    "transition_probabilities",
    "value_at",
]
