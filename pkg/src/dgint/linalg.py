"""Householder QR without the sign convention, with derivative propagation.

The reflectors are kept as compact vectors; Q is never formed densely.
Dropping the usual sign choice makes Q a smooth function of Y, which is what
lets us differentiate through the factorization. The price is a degenerate
case where a column is already aligned with +e_k; that reflection is skipped.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

SKIP_TOL = 1e-14
RANK_TOL = 1e-12


class RankDeficiencyError(np.linalg.LinAlgError):
    """Raised when a column of Y is (numerically) in the span of the previous ones."""

    def __init__(self, column: int, remaining: float, original: float):
        self.column = column
        self.remaining = remaining
        self.original = original
        super().__init__(
            f"column {column} is dependent on earlier columns "
            f"(remaining norm {remaining:.3e}, original norm {original:.3e})"
        )


class ReflectionBreakdownWarning(RuntimeWarning):
    """A skipped reflection received a nonzero derivative direction."""


class OpCounter:
    """Tally of floating point operations, for complexity checks."""

    def __init__(self):
        self.flops = 0

    def add(self, n: int) -> None:
        self.flops += int(n)

    def reset(self) -> None:
        self.flops = 0


def _count(counter, n):
    if counter is not None:
        counter.add(n)


@dataclass(frozen=True)
class QrFactors:
    m: int
    q: int
    reflectors: np.ndarray  # (q, m); row k has k leading zeros
    skipped: tuple[bool, ...]
    r_matrix: np.ndarray  # (q, q) upper triangular

    def condition_estimate(self) -> float:
        d = np.abs(np.diag(self.r_matrix))
        return float(d.max() / d.min())


@dataclass(frozen=True)
class QrDerivativeFactors:
    derivative_reflectors: np.ndarray  # (q, m), aligned with QrFactors.reflectors
    breakdown: tuple[bool, ...] = field(default=())


def _as_matrix(Y) -> np.ndarray:
    Y = np.array(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[0] < 1 or Y.shape[1] < 1:
        raise ValueError(f"expected a nonempty 2-d array, got shape {Y.shape}")
    m, q = Y.shape
    if q > m:
        raise ValueError(f"need m >= q, got m={m}, q={q}")
    return Y


def _reflector(x: np.ndarray, k: int, col_norm: float, rank_tol: float, counter):
    """Return (w, ||x||, skipped) for w = x - ||x|| e_1 on the trailing block x."""
    n = x.size
    nx = float(np.linalg.norm(x))
    _count(counter, 2 * n)
    if nx <= rank_tol * col_norm or nx == 0.0:
        raise RankDeficiencyError(k, nx, col_norm)
    w = x.copy()
    # x_1 - ||x|| loses everything when x is nearly +e_1; use the rationalized form
    if x[0] > 0:
        tail = float(x[1:] @ x[1:])
        w[0] = -tail / (x[0] + nx)
    else:
        w[0] = x[0] - nx
    _count(counter, 2 * n + 3)
    nw = float(np.linalg.norm(w))
    _count(counter, 2 * n)
    skipped = nw <= SKIP_TOL * nx
    return w, nw, nx, skipped


def householder_qr(Y, rank_tol: float = RANK_TOL, counter: OpCounter | None = None) -> QrFactors:
    """Factor Y = Q [R; 0] with Q a product of q reflections and diag(R) > 0."""
    Y = _as_matrix(Y)
    m, q = Y.shape
    A = Y.copy()
    col_norms = np.linalg.norm(Y, axis=0)
    V = np.zeros((q, m))
    skipped = []
    for k in range(q):
        x = A[k:, k].copy()
        w, nw, nx, skip = _reflector(x, k, col_norms[k], rank_tol, counter)
        skipped.append(skip)
        A[k, k] = nx
        A[k + 1:, k] = 0.0
        if skip:
            continue
        v = w / nw
        V[k, k:] = v
        B = A[k:, k + 1:]
        B -= 2.0 * np.outer(v, v @ B)
        _count(counter, 4 * v.size * B.shape[1] + v.size)
    return QrFactors(m, q, V, tuple(skipped), np.triu(A[:q, :]))


def householder_qr_with_derivative(
    Y,
    DY,
    rank_tol: float = RANK_TOL,
    counter: OpCounter | None = None,
) -> tuple[QrFactors, QrDerivativeFactors]:
    """Householder QR of Y together with the reflector derivatives Dv_k.

    DY is the derivative of Y along some path; the returned Dv_k are the
    derivatives of the reflectors along the same path. Cost O(mq^2 + q^3).
    """
    Y = _as_matrix(Y)
    DY = np.array(DY, dtype=float).reshape(Y.shape)
    m, q = Y.shape
    A = Y.copy()
    DA = DY.copy()
    col_norms = np.linalg.norm(Y, axis=0)
    V = np.zeros((q, m))
    DV = np.zeros((q, m))
    skipped = []
    breakdown = []
    for k in range(q):
        x = A[k:, k].copy()
        dx = DA[k:, k].copy()
        n = x.size
        w, nw, nx, skip = _reflector(x, k, col_norms[k], rank_tol, counter)
        skipped.append(skip)
        A[k, k] = nx
        A[k + 1:, k] = 0.0
        if skip:
            bad = bool(np.any(dx[1:] != 0.0))
            breakdown.append(bad)
            if bad:
                warnings.warn(
                    f"reflection {k} skipped (column aligned with +e_{k + 1}) "
                    "but its derivative is nonzero; using Dv = 0",
                    ReflectionBreakdownWarning,
                    stacklevel=2,
                )
            continue
        breakdown.append(False)
        dw = dx.copy()
        dw[0] -= float(x @ dx) / nx
        v = w / nw
        dv = (dw - (float(w @ dw) / nw**2) * w) / nw
        _count(counter, 2 * n + 2 + n + 2 * n + 4 * n)
        V[k, k:] = v
        DV[k, k:] = dv

        B = A[k:, k + 1:]
        DB = DA[k:, k + 1:]
        vB = v @ B
        dvB = dv @ B
        vDB = v @ DB
        DB -= 2.0 * (np.outer(v, vDB) + np.outer(dv, vB) + np.outer(v, dvB))
        B -= 2.0 * np.outer(v, vB)
        _count(counter, 16 * n * B.shape[1])
    return (
        QrFactors(m, q, V, tuple(skipped), np.triu(A[:q, :])),
        QrDerivativeFactors(DV, tuple(breakdown)),
    )


def _check_len(factors: QrFactors, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (factors.m,):
        raise ValueError(f"expected vector of length {factors.m}, got shape {x.shape}")
    return x


def apply_q(factors: QrFactors, x, counter: OpCounter | None = None) -> np.ndarray:
    """Q x = Q_1 ... Q_q x, applying Q_q first."""
    y = _check_len(factors, x).copy()
    for k in range(factors.q - 1, -1, -1):
        if factors.skipped[k]:
            continue
        v = factors.reflectors[k, k:]
        y[k:] -= 2.0 * float(v @ y[k:]) * v
        _count(counter, 4 * v.size)
    return y


def apply_qt(factors: QrFactors, x, counter: OpCounter | None = None) -> np.ndarray:
    """Q^T x = Q_q ... Q_1 x."""
    y = _check_len(factors, x).copy()
    for k in range(factors.q):
        if factors.skipped[k]:
            continue
        v = factors.reflectors[k, k:]
        y[k:] -= 2.0 * float(v @ y[k:]) * v
        _count(counter, 4 * v.size)
    return y


def apply_dq(
    factors: QrFactors,
    dfactors: QrDerivativeFactors,
    x,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """DQ x through the downward recursion P_{k-1} = Q_{k-1} P_k."""
    psi = _check_len(factors, x).copy()
    phi = np.zeros_like(psi)
    for k in range(factors.q - 1, -1, -1):
        v = factors.reflectors[k, k:]
        dv = dfactors.derivative_reflectors[k, k:]
        p = psi[k:]
        vp = float(v @ p)
        phi[k:] -= 2.0 * (vp * dv + float(dv @ p) * v + float(v @ phi[k:]) * v)
        p -= 2.0 * vp * v
        _count(counter, 16 * v.size)
    return phi


def tangent_basis_apply(factors: QrFactors, eta) -> np.ndarray:
    """T eta, where T holds the last m - q columns of Q."""
    eta = np.asarray(eta, dtype=float)
    m, q = factors.m, factors.q
    if eta.shape != (m - q,):
        raise ValueError(f"expected vector of length {m - q}, got shape {eta.shape}")
    lifted = np.zeros(m)
    lifted[q:] = eta
    return apply_q(factors, lifted)


def tangent_basis_transpose(factors: QrFactors, x) -> np.ndarray:
    """T^T x, the last m - q entries of Q^T x."""
    return apply_qt(factors, x)[factors.q:]


def dense_q(factors: QrFactors) -> np.ndarray:
    """Materialize Q column by column. Diagnostics and tests only."""
    return np.column_stack([apply_q(factors, e) for e in np.eye(factors.m)])
