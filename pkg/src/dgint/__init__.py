"""Projection and local-coordinates integrators that conserve chosen first integrals exactly.

The building blocks are discrete gradients of the invariants, a Householder QR
without the sign convention (so it can be differentiated), and any Runge-Kutta
tableau as the underlying scheme.
"""
from .dgrad import DiscreteGradient, Invariant, avf_gradient, ci_gradient, sci_gradient
from .linalg import (
    RankDeficiencyError,
    apply_dq,
    apply_q,
    apply_qt,
    householder_qr,
    householder_qr_with_derivative,
)
from .localcoords import Chart, local_step
from .problems import OdeProblem, SingularityError, get_problem, harmonic_oscillator, kepler_problem
from .projection import ProjectionMethodConfig, projection_step
from .rk import ButcherTableau, get_tableau, load_tableau, rk_flow, rk_increment
from .solvers import SolverError, fixed_point_solve, newton_solve

__version__ = "0.1.0"

__all__ = [
    "ButcherTableau",
    "Chart",
    "DiscreteGradient",
    "Invariant",
    "OdeProblem",
    "ProjectionMethodConfig",
    "RankDeficiencyError",
    "SingularityError",
    "SolverError",
    "apply_dq",
    "apply_q",
    "apply_qt",
    "avf_gradient",
    "ci_gradient",
    "fixed_point_solve",
    "get_problem",
    "get_tableau",
    "harmonic_oscillator",
    "householder_qr",
    "householder_qr_with_derivative",
    "kepler_problem",
    "load_tableau",
    "local_step",
    "newton_solve",
    "projection_step",
    "rk_flow",
    "rk_increment",
    "sci_gradient",
]
