"""Pseudospectral geodesic solvers for regularized transport metrics on torus densities."""

from .spectral import (
    FourierMultiplier,
    Grid,
    GridError,
    ScalarField,
    VectorField,
    apply_A_inv,
    apply_multiplier,
    divergence,
    gradient,
    inertia_symbol,
    l2_inner,
    make_grid,
)
from .geodesic import (
    DensityState,
    Diagnostics,
    SolverAbort,
    Trajectory,
    apply_L_rho,
    hamiltonian_rhs,
    horizontal_velocity,
    make_state,
    metric_energy,
    shoot,
    solve_L_rho,
    step_rk4,
)
from .epdiff import (
    DiffeoState,
    cross_validate,
    epdiff_rhs,
    horizontal_lift,
    horizontality_defect,
    integrate_epdiff,
    project_left,
)
from .matching import MatchProblem, MatchResult, OptSettings, solve_match

__version__ = "0.1.0"
