"""Benchmark problems: Kepler two-body problem and a harmonic oscillator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dgrad import Invariant

COLLISION_RADIUS = 1e-8


class SingularityError(ArithmeticError):
    """State too close to a singularity of the vector field."""


@dataclass(frozen=True)
class OdeProblem:
    name: str
    dimension: int
    field: Callable[[np.ndarray], np.ndarray]
    invariants: tuple[Invariant, ...]
    initial_state: np.ndarray
    reference_solution: Callable[[float], np.ndarray] | None = None
    params: dict | None = None

    def invariant_values(self, y, subset=None) -> np.ndarray:
        idx = range(len(self.invariants)) if subset is None else subset
        return np.array([self.invariants[i].value(y) for i in idx])

    def select(self, subset) -> list[Invariant]:
        return [self.invariants[i] for i in subset]


def _radius(y) -> float:
    r = math.hypot(y[0], y[1])
    if r < COLLISION_RADIUS:
        raise SingularityError(f"collision: |(y1, y2)| = {r:.3e}")
    return r


def kepler_field(y):
    r = _radius(y)
    r3 = r * r * r
    return np.array([y[2], y[3], -y[0] / r3, -y[1] / r3])


def _hess_inv_r(y, r):
    """Hessian of 1/r in the (y1, y2) block."""
    x = np.array([y[0], y[1]])
    return 3.0 * np.outer(x, x) / r**5 - np.eye(2) / r**3


def _hess_yc_over_r(y, r, c):
    """Hessian of y_c / r in the (y1, y2) block, c in {0, 1}."""
    x = np.array([y[0], y[1]])
    ec = np.eye(2)[c]
    return -(np.outer(ec, x) + np.outer(x, ec) + y[c] * np.eye(2)) / r**3 + 3.0 * y[c] * np.outer(x, x) / r**5


def _h1(y):
    return 0.5 * (y[2] ** 2 + y[3] ** 2) - 1.0 / _radius(y)


def _h1_grad(y):
    r = _radius(y)
    r3 = r**3
    return np.array([y[0] / r3, y[1] / r3, y[2], y[3]])


def _h1_hess(y):
    r = _radius(y)
    H = np.zeros((4, 4))
    H[:2, :2] = -_hess_inv_r(y, r)
    H[2, 2] = H[3, 3] = 1.0
    return H


def _h2(y):
    return y[0] * y[3] - y[1] * y[2]


def _h2_grad(y):
    return np.array([y[3], -y[2], -y[1], y[0]])


_H2_HESS = np.array([[0, 0, 0, 1], [0, 0, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]], dtype=float)


def _h2_hess(y):
    return _H2_HESS.copy()


def _h3(y):
    return y[1] * y[2] ** 2 - y[0] * y[2] * y[3] - y[1] / _radius(y)


def _h3_grad(y):
    y1, y2, y3, y4 = y
    r = _radius(y)
    r3 = r**3
    return np.array([
        -y3 * y4 + y1 * y2 / r3,
        y3**2 - 1.0 / r + y2 * y2 / r3,
        2.0 * y2 * y3 - y1 * y4,
        -y1 * y3,
    ])


def _h3_hess(y):
    y1, y2, y3, y4 = y
    r = _radius(y)
    H = np.zeros((4, 4))
    H[:2, :2] = -_hess_yc_over_r(y, r, 1)
    # polynomial part y2 y3^2 - y1 y3 y4
    H[0, 2] = H[2, 0] = -y4
    H[0, 3] = H[3, 0] = -y3
    H[1, 2] = H[2, 1] = 2.0 * y3
    H[2, 2] = 2.0 * y2
    H[2, 3] = H[3, 2] = -y1
    return H


def _h4(y):
    return y[0] * y[3] ** 2 - y[1] * y[2] * y[3] - y[0] / _radius(y)


def _h4_grad(y):
    y1, y2, y3, y4 = y
    r = _radius(y)
    r3 = r**3
    return np.array([
        y4**2 - 1.0 / r + y1 * y1 / r3,
        -y3 * y4 + y1 * y2 / r3,
        -y2 * y4,
        2.0 * y1 * y4 - y2 * y3,
    ])


def _h4_hess(y):
    y1, y2, y3, y4 = y
    r = _radius(y)
    H = np.zeros((4, 4))
    H[:2, :2] = -_hess_yc_over_r(y, r, 0)
    # polynomial part y1 y4^2 - y2 y3 y4
    H[0, 3] = H[3, 0] = 2.0 * y4
    H[1, 2] = H[2, 1] = -y4
    H[1, 3] = H[3, 1] = -y3
    H[2, 3] = H[3, 2] = -y2
    H[3, 3] = 2.0 * y1
    return H


KEPLER_INVARIANTS = (
    Invariant("H1", _h1, _h1_grad, _h1_hess),
    Invariant("H2", _h2, _h2_grad, _h2_hess),
    Invariant("H3", _h3, _h3_grad, _h3_hess),
    Invariant("H4", _h4, _h4_grad, _h4_hess),
)


def eccentric_anomaly(e: float, t: float, tol: float = 1e-14, max_iter: int = 50) -> float:
    """Solve E - e sin E = t by Newton's method started at E = t."""
    E = t
    for _ in range(max_iter):
        dE = (E - e * math.sin(E) - t) / (1.0 - e * math.cos(E))
        E -= dE
        if abs(dE) <= tol * (1.0 + abs(E)):
            return E
    raise ArithmeticError(f"Kepler equation did not converge for e={e}, t={t}")


def kepler_reference(e: float, t: float) -> np.ndarray:
    """Exact solution from the standard initial data (semi-major axis 1, period 2 pi)."""
    if not 0.0 <= e < 1.0:
        raise ValueError("eccentricity must satisfy 0 <= e < 1")
    E = eccentric_anomaly(e, t)
    cE, sE = math.cos(E), math.sin(E)
    d = 1.0 - e * cE
    s = math.sqrt(1.0 - e * e)
    return np.array([cE - e, s * sE, -sE / d, s * cE / d])


def kepler_problem(e: float = 0.6) -> OdeProblem:
    if not 0.0 <= e < 1.0:
        raise ValueError("eccentricity must satisfy 0 <= e < 1")
    y0 = np.array([1.0 - e, 0.0, 0.0, math.sqrt((1.0 + e) / (1.0 - e))])
    return OdeProblem(
        name="kepler",
        dimension=4,
        field=kepler_field,
        invariants=KEPLER_INVARIANTS,
        initial_state=y0,
        reference_solution=lambda t: kepler_reference(e, t),
        params={"e": e},
    )


def harmonic_oscillator() -> OdeProblem:
    H = Invariant(
        "H1",
        lambda y: 0.5 * float(y @ y),
        lambda y: np.array(y, dtype=float),
        lambda y: np.eye(2),
    )
    return OdeProblem(
        name="harmonic",
        dimension=2,
        field=lambda y: np.array([y[1], -y[0]]),
        invariants=(H,),
        initial_state=np.array([1.0, 0.0]),
        reference_solution=lambda t: np.array([math.cos(t), -math.sin(t)]),
    )


PROBLEMS = {"kepler": kepler_problem, "harmonic": harmonic_oscillator}


def get_problem(name: str, e: float = 0.6) -> OdeProblem:
    if name == "kepler":
        return kepler_problem(e)
    if name in ("harmonic", "oscillator"):
        return harmonic_oscillator()
    raise KeyError(f"unknown problem {name!r}")
