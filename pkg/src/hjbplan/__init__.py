"""Stochastic production planning on convex domains.

Solves the exponentially transformed cost PDE on interval and elliptical
domains, derives the optimal feedback control, simulates the controlled
inventory process to its stopping time, and verifies the structural
properties of the solution numerically.
"""

__version__ = "0.1.0"

from .cost import CostField, eval_cost, parse_cost, sample_on_grid
from .domain import (
    EllipseSpec,
    Grid1D,
    MaskedGrid2D,
    build_interval_grid,
    build_masked_grid,
    stopping_radius,
)
from .errors import InternalError, InvalidArgumentError, InvalidDataError, SolverError
from .pde import (
    ScalarField,
    SolveStats,
    SolverConfig,
    boundary_value,
    solve_1d_direct,
    solve_2d_gauss_seidel,
    solve_auxiliary,
    solve_monotone_iteration,
    stencil_residual,
)
from .sde import (
    MCReport,
    SimConfig,
    Trajectory,
    monte_carlo_cost,
    simulate,
    write_trajectory_csv,
)
from .transform import (
    ControlField,
    gradient,
    interp_scalar,
    optimal_control,
    query_control,
    value_function,
)
from .verify import (
    VerificationReport,
    check_boundary_asymptotic,
    check_concavity_slices,
    check_cross_solver,
    check_radial_symmetry,
    check_sandwich,
    estimate_gamma,
    martingale_test,
    rim_depth,
    serialize_reports,
)

__all__ = [
    "__version__",
    "CostField", "eval_cost", "parse_cost", "sample_on_grid",
    "EllipseSpec", "Grid1D", "MaskedGrid2D",
    "build_interval_grid", "build_masked_grid", "stopping_radius",
    "InternalError", "InvalidArgumentError", "InvalidDataError", "SolverError",
    "ScalarField", "SolveStats", "SolverConfig", "boundary_value",
    "solve_1d_direct", "solve_2d_gauss_seidel", "solve_auxiliary",
    "solve_monotone_iteration", "stencil_residual",
    "MCReport", "SimConfig", "Trajectory", "monte_carlo_cost", "simulate",
    "write_trajectory_csv",
    "ControlField", "gradient", "interp_scalar", "optimal_control",
    "query_control", "value_function",
    "VerificationReport", "check_boundary_asymptotic", "check_concavity_slices",
    "check_cross_solver", "check_radial_symmetry", "check_sandwich",
    "estimate_gamma", "martingale_test", "rim_depth", "serialize_reports",
]
