"""Local-coordinates integrator built on discrete tangent spaces.

Around a base point y0 the level set of the selected invariants is
parametrized by eta in R^{m-q} through the implicit chart

    y - y0 = T(y0, y) eta,

with T(y0, y) the last m - q columns of the Householder Q of
Y(y0, y) = [dg H_1(y0, y), ..., dg H_q(y0, y)]. Every point of the chart
conserves the invariants exactly, so one Runge-Kutta step in eta followed by
the chart map gives a conservative method of the tableau's order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .dgrad import DiscreteGradient, assemble_DY, assemble_Y
from .problems import OdeProblem
from .rk import ButcherTableau, rk_increment
from .solvers import FIXED_POINT_MAXITER, NEWTON_MAXITER, TOL, SolverError, solve_with_escalation


class Chart:
    """Working state of one chart: base point, selected invariants, warm start."""

    def __init__(
        self,
        problem: OdeProblem,
        base_point,
        invariant_subset,
        strategy: DiscreteGradient | None = None,
        tol: float = TOL,
        fp_max_iter: int = FIXED_POINT_MAXITER,
        newton_max_iter: int = NEWTON_MAXITER,
    ):
        self.problem = problem
        self.y0 = np.asarray(base_point, dtype=float)
        # ascending order fixes the eta frame
        self.subset = tuple(sorted(invariant_subset))
        if not self.subset:
            raise ValueError("invariant subset must not be empty")
        self.invariants = problem.select(self.subset)
        self.strategy = strategy or DiscreteGradient()
        self.tol = tol
        self.fp_max_iter = fp_max_iter
        self.newton_max_iter = newton_max_iter
        self.m = self.y0.size
        self.q = len(self.invariants)
        self.iterations = 0
        self._warm = self.y0.copy()

    @property
    def dim(self) -> int:
        return self.m - self.q

    def factors(self, y) -> linalg.QrFactors:
        return linalg.householder_qr(assemble_Y(self.strategy, self.invariants, self.y0, y))

    def basis_apply(self, y, eta) -> np.ndarray:
        return linalg.tangent_basis_apply(self.factors(y), eta)

    def solve(self, eta, warm_start: bool = True) -> np.ndarray:
        """chi(eta): the point y with y - y0 = T(y0, y) eta."""
        eta = np.asarray(eta, dtype=float)
        if eta.shape != (self.dim,):
            raise ValueError(f"expected eta of length {self.dim}, got shape {eta.shape}")
        if not np.any(eta):
            return self.y0.copy()

        def G(y):
            return self.y0 + self.basis_apply(y, eta)

        start = self._warm if warm_start else self.y0
        rep = solve_with_escalation(G, start, self.tol, self.fp_max_iter, self.newton_max_iter)
        if not rep.converged:
            raise SolverError("chart map", rep)
        y = G(rep.solution)  # lands the point on the chart of its own tangent space
        self.iterations += rep.iterations + 1
        self._warm = y
        return y

    def field(self, eta) -> np.ndarray:
        """d eta / dt = -T^T T'(f) eta + T^T f, everything evaluated at y = chi(eta)."""
        eta = np.asarray(eta, dtype=float)
        y = self.solve(eta)
        fy = np.asarray(self.problem.field(y), dtype=float)
        Y = assemble_Y(self.strategy, self.invariants, self.y0, y)
        if not np.any(eta):
            return linalg.tangent_basis_transpose(linalg.householder_qr(Y), fy)
        DY = assemble_DY(self.strategy, self.invariants, self.y0, y, fy)
        fac, dfac = linalg.householder_qr_with_derivative(Y, DY)
        lifted = np.zeros(self.m)
        lifted[self.q:] = eta
        curvature = linalg.apply_dq(fac, dfac, lifted)
        return linalg.tangent_basis_transpose(fac, fy - curvature)


def chart_solve(chart: Chart, eta) -> np.ndarray:
    return chart.solve(eta)


def transformed_field(chart: Chart, eta) -> np.ndarray:
    return chart.field(eta)


@dataclass
class LocalStepResult:
    state: np.ndarray
    iterations: int
    eta: np.ndarray = field(default=None)


def local_step(
    problem: OdeProblem,
    tableau: ButcherTableau,
    y0,
    h: float,
    invariant_subset,
    strategy: DiscreteGradient | None = None,
    tol: float = TOL,
) -> LocalStepResult:
    """One step: eta0 = 0, an RK step on the chart field, then y1 = chi(eta1)."""
    chart = Chart(problem, y0, invariant_subset, strategy, tol)
    eta1 = rk_increment(tableau, chart.field, np.zeros(chart.dim), h)
    y1 = chart.solve(eta1)
    return LocalStepResult(y1, chart.iterations, eta1)
