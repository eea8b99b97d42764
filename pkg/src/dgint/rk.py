"""Runge-Kutta engine: Butcher tableaus, one-step flows and two-point increments."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Fr
from pathlib import Path
from typing import Callable

import numpy as np

from .solvers import SolverError, fixed_point_solve, newton_solve

STAGE_TOL = 1e-12
STAGE_MAXITER = 50


class UnsupportedTableauError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    name: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        s = b.size
        if a.shape != (s, s) or c.shape != (s,):
            raise ValueError(f"{self.name}: inconsistent tableau shapes {a.shape}, {b.shape}, {c.shape}")
        if abs(b.sum() - 1.0) > 1e-14:
            raise ValueError(f"{self.name}: weights sum to {b.sum()!r}, not 1")
        if np.max(np.abs(a.sum(axis=1) - c)) > 1e-14:
            raise ValueError(f"{self.name}: nodes are not the row sums of a")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def is_explicit(self) -> bool:
        return not np.any(np.triu(self.a))

    @property
    def is_implicit_midpoint(self) -> bool:
        return self.stages == 1 and self.a[0, 0] == 0.5 and self.b[0] == 1.0


def _tab(name, rows, b, order):
    s = len(b)
    a = np.zeros((s, s))
    for i, row in enumerate(rows):
        a[i, : len(row)] = [float(x) for x in row]
    # row sums done in exact arithmetic so the node check sees no rounding
    c = [float(sum((Fr(x) for x in row), Fr(0))) for row in rows]
    c += [0.0] * (s - len(c))
    return ButcherTableau(name, a, np.array([float(x) for x in b]), np.array(c), order)


def _build_tableaus() -> dict[str, ButcherTableau]:
    F = Fr
    tabs = [
        _tab("euler", [[0]], [1], 1),
        _tab("rk2_midpoint_explicit", [[0, 0], [F(1, 2)]], [0, 1], 2),
        _tab("heun", [[0, 0], [1]], [F(1, 2), F(1, 2)], 2),
        _tab(
            "rk4_classical",
            [[0], [F(1, 2)], [0, F(1, 2)], [0, 0, 1]],
            [F(1, 6), F(1, 3), F(1, 3), F(1, 6)],
            4,
        ),
        # Fehlberg's 6-stage fifth-order solution
        _tab(
            "rk5",
            [
                [0],
                [F(1, 4)],
                [F(3, 32), F(9, 32)],
                [F(1932, 2197), F(-7200, 2197), F(7296, 2197)],
                [F(439, 216), -8, F(3680, 513), F(-845, 4104)],
                [F(-8, 27), 2, F(-3544, 2565), F(1859, 4104), F(-11, 40)],
            ],
            [F(16, 135), 0, F(6656, 12825), F(28561, 56430), F(-9, 50), F(2, 55)],
            5,
        ),
        # Fehlberg 7(8): the seventh-order solution uses the first 11 stages
        _tab(
            "rk7",
            [
                [0],
                [F(2, 27)],
                [F(1, 36), F(1, 12)],
                [F(1, 24), 0, F(1, 8)],
                [F(5, 12), 0, F(-25, 16), F(25, 16)],
                [F(1, 20), 0, 0, F(1, 4), F(1, 5)],
                [F(-25, 108), 0, 0, F(125, 108), F(-65, 27), F(125, 54)],
                [F(31, 300), 0, 0, 0, F(61, 225), F(-2, 9), F(13, 900)],
                [2, 0, 0, F(-53, 6), F(704, 45), F(-107, 9), F(67, 90), 3],
                [F(-91, 108), 0, 0, F(23, 108), F(-976, 135), F(311, 54), F(-19, 60), F(17, 6), F(-1, 12)],
                [F(2383, 4100), 0, 0, F(-341, 164), F(4496, 1025), F(-301, 82), F(2133, 4100), F(45, 82), F(45, 164), F(18, 41)],
            ],
            [F(41, 840), 0, 0, 0, 0, F(34, 105), F(9, 35), F(9, 35), F(9, 280), F(9, 280), F(41, 840)],
            7,
        ),
        _tab("implicit_midpoint", [[F(1, 2)]], [1], 2),
    ]
    return {t.name: t for t in tabs}


_BUILTIN = _build_tableaus()
ALIASES = {"rk1": "euler", "rk2": "rk2_midpoint_explicit", "rk4": "rk4_classical", "midpoint": "implicit_midpoint"}


def builtin_tableaus() -> dict[str, ButcherTableau]:
    return dict(_BUILTIN)


def get_tableau(name: str) -> ButcherTableau:
    key = ALIASES.get(name.lower(), name.lower())
    try:
        return _BUILTIN[key]
    except KeyError:
        path = Path(name)
        if path.is_file():
            return load_tableau(path)
        raise KeyError(f"unknown tableau {name!r}; known: {sorted(_BUILTIN) + sorted(ALIASES)}") from None


def _parse_number(tok: str) -> float:
    return float(Fr(tok)) if "/" in tok else float(tok)


def load_tableau(path, name: str | None = None) -> ButcherTableau:
    """Read a tableau from text: s rows of a, then b, then c, then the order.

    Entries are whitespace separated; fractions like 1/6 are accepted.
    Blank lines and lines starting with '#' are ignored.
    """
    path = Path(path)
    lines = [ln.split() for ln in path.read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if len(lines) < 4:
        raise ValueError(f"{path}: too few lines for a tableau")
    order = int(lines[-1][0])
    rows = [[_parse_number(t) for t in ln] for ln in lines[:-1]]
    s = len(rows) - 2
    a, b, c = np.array(rows[:s]), np.array(rows[s]), np.array(rows[s + 1])
    if a.shape != (s, s):
        raise ValueError(f"{path}: a must be {s}x{s}, got {a.shape}")
    return ButcherTableau(name or path.stem, a, b, c, order)


def _stages(tab: ButcherTableau, f: Callable, y: np.ndarray, h: float) -> tuple[np.ndarray, int]:
    s, m = tab.stages, y.size
    K = np.zeros((s, m))
    if tab.is_explicit:
        for i in range(s):
            K[i] = f(y + h * (tab.a[i, :i] @ K[:i]))
        return K, 0

    def G(kflat):
        Kc = kflat.reshape(s, m)
        return np.concatenate([f(y + h * (tab.a[i] @ Kc)) for i in range(s)])

    k0 = np.tile(f(y), s)
    rep = fixed_point_solve(G, k0, STAGE_TOL, STAGE_MAXITER)
    if not rep.converged:
        rep2 = newton_solve(lambda k: k - G(k), k0, STAGE_TOL, 25)
        if not rep2.converged:
            raise SolverError(f"{tab.name} stage equations", rep2)
        rep = rep2
    return rep.solution.reshape(s, m), rep.iterations


def rk_increment(tab: ButcherTableau, f: Callable, y, h: float) -> np.ndarray:
    """h * sum_i b_i k_i, so that phi_h(y) = y + rk_increment(...)."""
    y = np.asarray(y, dtype=float)
    K, _ = _stages(tab, f, y, h)
    return h * (tab.b @ K)


def rk_flow(tab: ButcherTableau, f: Callable, y, h: float) -> np.ndarray:
    """One Runge-Kutta step phi_h(y)."""
    if h == 0:
        raise ValueError("step size must be nonzero")
    y = np.asarray(y, dtype=float)
    return y + rk_increment(tab, f, y, h)


def increment_function(tab: ButcherTableau, f: Callable, v, u, h: float) -> np.ndarray:
    """Two-point increment psi_h(v, u) with y_{n+1} = y_n + h psi_h(y_n, y_{n+1}).

    Explicit tableaus ignore u. The implicit midpoint rule gives f((v+u)/2);
    other implicit tableaus have no canonical two-point form and are rejected.
    """
    v = np.asarray(v, dtype=float)
    if tab.is_explicit:
        K, _ = _stages(tab, f, v, h)
        return tab.b @ K
    if tab.is_implicit_midpoint:
        return np.asarray(f(0.5 * (v + np.asarray(u, dtype=float))), dtype=float)
    raise UnsupportedTableauError(f"tableau {tab.name!r} has no two-point increment form")


def integrate(tab: ButcherTableau, f: Callable, y0, h: float, steps: int) -> np.ndarray:
    """Plain fixed-step integration; returns the (steps+1, m) trajectory."""
    ys = [np.asarray(y0, dtype=float)]
    for _ in range(steps):
        ys.append(rk_flow(tab, f, ys[-1], h))
    return np.array(ys)
