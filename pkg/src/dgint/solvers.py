"""Fixed-point and Newton iterations used by every implicit step in the package."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FIXED_POINT_MAXITER = 50
NEWTON_MAXITER = 25
TOL = 1e-12


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    iterations: int
    residual_norm: float
    solution: np.ndarray
    method: str = ""
    message: str = ""


class SolverError(RuntimeError):
    """A nonlinear solve did not converge; carries the final report."""

    def __init__(self, what: str, report: SolveReport):
        self.report = report
        super().__init__(
            f"{what}: {report.method} failed after {report.iterations} iterations "
            f"(residual {report.residual_norm:.3e}){': ' + report.message if report.message else ''}"
        )


def fixed_point_solve(
    G: Callable[[np.ndarray], np.ndarray],
    x0,
    tol: float = TOL,
    max_iter: int = FIXED_POINT_MAXITER,
) -> SolveReport:
    """Iterate x <- G(x) until successive iterates agree to `tol`."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.array(x0, dtype=float)
    res = np.inf
    for it in range(1, max_iter + 1):
        x_new = np.asarray(G(x), dtype=float)
        res = float(np.linalg.norm(x_new - x))
        x = x_new
        if not np.isfinite(res):
            return SolveReport(False, it, res, x, "fixed-point", "iterates are not finite")
        if res <= tol:
            return SolveReport(True, it, res, x, "fixed-point")
    return SolveReport(False, max_iter, res, x, "fixed-point", "iteration limit reached")


def fd_jacobian(F: Callable, x: np.ndarray, Fx: np.ndarray | None = None) -> np.ndarray:
    """Forward-difference Jacobian with step 1e-7 (1 + ||x||)."""
    x = np.asarray(x, dtype=float)
    if Fx is None:
        Fx = np.asarray(F(x), dtype=float)
    step = 1e-7 * (1.0 + np.linalg.norm(x))
    J = np.empty((Fx.size, x.size))
    for j in range(x.size):
        xp = x.copy()
        xp[j] += step
        J[:, j] = (np.asarray(F(xp), dtype=float) - Fx) / step
    return J


def newton_solve(
    F: Callable[[np.ndarray], np.ndarray],
    x0,
    tol: float = TOL,
    max_iter: int = NEWTON_MAXITER,
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
    polish: int = 0,
) -> SolveReport:
    """Undamped Newton iteration; converged once ||F(x)|| <= tol.

    Without an analytic `jacobian` a forward-difference one is used.
    `polish` extra iterations are taken after convergence, pushing the
    residual from `tol` down to rounding level.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.array(x0, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)

    def Fv(z):
        return np.atleast_1d(np.asarray(F(z[0] if scalar else z), dtype=float))

    def Jv(z, Fz):
        if jacobian is None:
            return fd_jacobian(Fv, z, Fz)
        return np.atleast_2d(np.asarray(jacobian(z[0] if scalar else z), dtype=float))

    def out(conv, it, res, msg=""):
        return SolveReport(conv, it, res, x[0] if scalar else x, "newton", msg)

    Fx = Fv(x)
    res = float(np.linalg.norm(Fx))
    for it in range(1, max_iter + 1):
        J = Jv(x, Fx)
        try:
            if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e15:
                raise np.linalg.LinAlgError("singular Jacobian")
            dx = np.linalg.solve(J, Fx)
        except np.linalg.LinAlgError:
            return out(False, it, res, "singular Jacobian")
        x = x - dx
        Fx = Fv(x)
        res = float(np.linalg.norm(Fx))
        if not np.isfinite(res):
            return out(False, it, res, "residual is not finite")
        if res <= tol:
            for _ in range(polish):
                x_p = x - np.linalg.solve(Jv(x, Fx), Fx)
                F_p = Fv(x_p)
                r_p = float(np.linalg.norm(F_p))
                if not r_p <= res:
                    break
                x, Fx, res = x_p, F_p, r_p
                it += 1
            return out(True, it, res)
    return out(False, max_iter, res, "iteration limit reached")


def solve_with_escalation(
    G: Callable[[np.ndarray], np.ndarray],
    x0,
    tol: float = TOL,
    fp_max_iter: int = FIXED_POINT_MAXITER,
    newton_max_iter: int = NEWTON_MAXITER,
) -> SolveReport:
    """Solve x = G(x): fixed point first, then Newton on x - G(x) from the same start.

    The returned iteration count is the total over both attempts.
    """
    rep = fixed_point_solve(G, x0, tol, fp_max_iter)
    if rep.converged:
        return rep
    rep2 = newton_solve(lambda x: x - G(x), x0, tol, newton_max_iter)
    return SolveReport(
        rep2.converged,
        rep.iterations + rep2.iterations,
        rep2.residual_norm,
        rep2.solution,
        "fixed-point+newton",
        rep2.message,
    )
