"""Discrete gradients (AVF, coordinate increment, symmetrized coordinate increment).

A discrete gradient dg(v, u) of H satisfies

    H(u) - H(v) = dg(v, u) . (u - v)    and    dg(u, u) = grad H(u).

Besides the gradients themselves this module provides their derivatives with
respect to the second argument, which the local-coordinates integrator needs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

KINDS = ("avf", "ci", "sci")


class MissingHessianError(ValueError):
    """A derivative map needs a Hessian the invariant does not provide."""


@dataclass(frozen=True)
class Invariant:
    name: str
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, y) -> float:
        return self.value(y)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _hessian(H: Invariant, x: np.ndarray, allow_fd: bool) -> np.ndarray:
    if H.hessian is not None:
        return np.asarray(H.hessian(x), dtype=float)
    if not allow_fd:
        raise MissingHessianError(
            f"invariant {H.name!r} has no Hessian and finite-difference fallback is disabled"
        )
    step = 1e-6 * (1.0 + np.linalg.norm(x))
    m = x.size
    out = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = step
        out[:, j] = (H.gradient(x + e) - H.gradient(x - e)) / (2.0 * step)
    return 0.5 * (out + out.T)


# --- averaged vector field -------------------------------------------------


def avf_gradient(H: Invariant, v, u, nodes: int = 8) -> np.ndarray:
    """Gauss-Legendre approximation of the integral of grad H over the segment [v, u].

    Exact for polynomial H up to degree 2*nodes; for other H the defining
    identity only holds up to the quadrature error.
    """
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    xs, ws = gauss_legendre(nodes)
    # midpoint form keeps dg(v, u) == dg(u, v) up to summation order
    mid = 0.5 * (u + v)
    half = 0.5 * (u - v)
    out = np.zeros_like(v)
    for x, w in zip(xs, ws):
        out += w * np.asarray(H.gradient(mid + (2.0 * x - 1.0) * half), dtype=float)
    return out


def avf_gradient_derivative(H: Invariant, v, u, zeta, nodes: int = 8, allow_fd: bool = False) -> np.ndarray:
    """Directional derivative of avf_gradient(H, v, u) in u along zeta."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if H.hessian is None:
        if not allow_fd:
            raise MissingHessianError(
                f"invariant {H.name!r} has no Hessian and finite-difference fallback is disabled"
            )
        step = 1e-6 * (1.0 + np.linalg.norm(u))
        return (avf_gradient(H, v, u + step * zeta, nodes) - avf_gradient(H, v, u - step * zeta, nodes)) / (2.0 * step)
    xs, ws = gauss_legendre(nodes)
    out = np.zeros_like(u)
    for x, w in zip(xs, ws):
        out += (w * x) * (np.asarray(H.hessian(x * u + (1.0 - x) * v), dtype=float) @ zeta)
    return out


# --- coordinate increment ----------------------------------------------------
#
# ci(a, b)_i = (H(z_i) - H(z_{i-1})) / (b_i - a_i) with z_i = (b_1..b_i, a_{i+1}..a_m),
# so z_0 = a and z_m = b. When b_i is close to a_i the quotient is replaced by
# the equivalent segment integral of dH/dy_i from z_{i-1} to z_i, evaluated with
# a short Gauss-Legendre rule; its limit as b_i -> a_i is the partial derivative.

DEGENERACY_TOL = 1e-3
SEGMENT_NODES = 4


def _chain(a: np.ndarray, b: np.ndarray) -> list[np.ndarray]:
    m = a.size
    pts = []
    for i in range(m + 1):
        z = a.copy()
        z[:i] = b[:i]
        pts.append(z)
    return pts


def _degenerate(a, b, i, tol) -> bool:
    return abs(b[i] - a[i]) <= tol * (1.0 + abs(a[i]) + abs(b[i]))


def _segment_points(z_prev: np.ndarray, i: int, delta: float):
    xs, ws = gauss_legendre(SEGMENT_NODES)
    for s, w in zip(xs, ws):
        p = z_prev.copy()
        p[i] += s * delta
        yield s, w, p


def _ci(H: Invariant, a, b, tol: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    z = _chain(a, b)
    Hz = [H.value(p) for p in z]
    out = np.empty(a.size)
    for i in range(a.size):
        delta = b[i] - a[i]
        if _degenerate(a, b, i, tol):
            out[i] = sum(w * H.gradient(p)[i] for _, w, p in _segment_points(z[i], i, delta))
        else:
            out[i] = (Hz[i + 1] - Hz[i]) / delta
    return out


def _ci_jacobians(H: Invariant, a, b, tol: float, allow_fd: bool, wrt: str) -> np.ndarray:
    """Jacobian of ci(a, b) with respect to the first ('a') or second ('b') argument."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = a.size
    z = _chain(a, b)
    Hz = [None] * (m + 1)
    Gz = [None] * (m + 1)

    def val(k):
        if Hz[k] is None:
            Hz[k] = H.value(z[k])
        return Hz[k]

    def grad(k):
        if Gz[k] is None:
            Gz[k] = np.asarray(H.gradient(z[k]), dtype=float)
        return Gz[k]

    J = np.zeros((m, m))
    for i in range(m):
        delta = b[i] - a[i]
        if _degenerate(a, b, i, tol):
            for s, w, p in _segment_points(z[i], i, delta):
                row = _hessian(H, p, allow_fd)[i]
                if wrt == "b":
                    J[i, :i] += w * row[:i]
                    J[i, i] += w * s * row[i]
                else:
                    J[i, i + 1:] += w * row[i + 1:]
                    J[i, i] += w * (1.0 - s) * row[i]
            continue
        dH = val(i + 1) - val(i)
        if wrt == "b":
            # b_j (j < i) sits in both z_i and z_{i-1}; b_i only in z_i
            J[i, :i] = (grad(i + 1)[:i] - grad(i)[:i]) / delta
            J[i, i] = grad(i + 1)[i] / delta - dH / delta**2
        else:
            # a_j (j > i) sits in both; a_i only in z_{i-1}
            J[i, i + 1:] = (grad(i + 1)[i + 1:] - grad(i)[i + 1:]) / delta
            J[i, i] = -grad(i)[i] / delta + dH / delta**2
    return J


def ci_gradient(H: Invariant, v, u, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Coordinate increment (Itoh-Abe) discrete gradient."""
    return _ci(H, v, u, tol)


def sci_gradient(H: Invariant, v, u, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Symmetrized coordinate increment discrete gradient."""
    return 0.5 * (_ci(H, v, u, tol) + _ci(H, u, v, tol))


def ci_gradient_jacobian(H: Invariant, v, u, tol: float = DEGENERACY_TOL, allow_fd: bool = True) -> np.ndarray:
    """Lower-triangular Jacobian of ci_gradient(H, v, u) with respect to u."""
    return _ci_jacobians(H, v, u, tol, allow_fd, "b")


def sci_gradient_jacobian(H: Invariant, v, u, tol: float = DEGENERACY_TOL, allow_fd: bool = True) -> np.ndarray:
    """Jacobian of sci_gradient(H, v, u) with respect to u."""
    return 0.5 * (_ci_jacobians(H, v, u, tol, allow_fd, "b") + _ci_jacobians(H, u, v, tol, allow_fd, "a"))


# --- strategy ----------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteGradient:
    """Choice of discrete gradient plus its numerical knobs.

    kind: 'avf', 'ci' or 'sci'. `nodes` is the AVF quadrature order,
    `degeneracy_tol` the relative band in which CI/SCI switch from the
    difference quotient to the segment integral. `allow_fd` permits
    finite-difference Hessians for invariants that lack one.
    """

    kind: str = "sci"
    nodes: int = 8
    degeneracy_tol: float = DEGENERACY_TOL
    allow_fd: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown discrete gradient {self.kind!r}; expected one of {KINDS}")
        if self.nodes < 1:
            raise ValueError("need at least one quadrature node")

    def __call__(self, H: Invariant, v, u) -> np.ndarray:
        if self.kind == "avf":
            return avf_gradient(H, v, u, self.nodes)
        if self.kind == "ci":
            return ci_gradient(H, v, u, self.degeneracy_tol)
        return sci_gradient(H, v, u, self.degeneracy_tol)

    def derivative(self, H: Invariant, v, u, zeta) -> np.ndarray:
        """Directional derivative of self(H, v, u) in u along zeta."""
        if self.kind == "avf":
            return avf_gradient_derivative(H, v, u, zeta, self.nodes, self.allow_fd)
        return self.jacobian(H, v, u) @ np.asarray(zeta, dtype=float)

    def jacobian(self, H: Invariant, v, u) -> np.ndarray:
        if self.kind == "ci":
            return ci_gradient_jacobian(H, v, u, self.degeneracy_tol, self.allow_fd)
        if self.kind == "sci":
            return sci_gradient_jacobian(H, v, u, self.degeneracy_tol, self.allow_fd)
        m = np.asarray(u).size
        return np.column_stack([self.derivative(H, v, u, e) for e in np.eye(m)])


def assemble_Y(strategy: DiscreteGradient, invariants: Sequence[Invariant], v, u) -> np.ndarray:
    """m x q matrix whose columns are the discrete gradients of the invariants."""
    if len(invariants) == 0:
        raise ValueError("need at least one invariant")
    return np.column_stack([strategy(H, v, u) for H in invariants])


def assemble_DY(strategy: DiscreteGradient, invariants: Sequence[Invariant], v, u, zeta) -> np.ndarray:
    """Derivative of assemble_Y with respect to u along zeta."""
    if len(invariants) == 0:
        raise ValueError("need at least one invariant")
    return np.column_stack([strategy.derivative(H, v, u, zeta) for H in invariants])
