"""Property checks behind ``dgint check`` and the acceptance tests.

Each check returns a CheckResult; `quick=True` shrinks run lengths and sample
counts so the whole suite finishes in seconds, at the cost of weaker evidence.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import linalg
from .dgrad import ci_gradient, ci_gradient_jacobian, sci_gradient, sci_gradient_jacobian
from .experiments import RunConfig, compare_standard, order_study, run
from .localcoords import local_step
from .problems import KEPLER_INVARIANTS, kepler_problem
from .projection import ProjectionMethodConfig, scheme_a_step, scheme_b_step
from .rk import get_tableau, rk_flow

FD_EPS = 1e-6


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def conservation(quick: bool = False) -> CheckResult:
    steps = 200 if quick else 2000
    worst, slowest, parts = 0.0, 0.0, []
    for subset in ((1,), (3,), (1, 3), (1, 2, 3)):
        traj = run(RunConfig(method="scheme_a", tableau="rk4", dgrad="sci", invariants=subset, h=0.2, steps=steps))
        dev = float(traj.max_deviation().max()) if traj.complete else math.inf
        worst = max(worst, dev)
        slowest = max(slowest, traj.wall_time)
        parts.append(f"{{{','.join(map(str, subset))}}}:{dev:.1e}/{traj.wall_time:.1f}s")
    ok = worst <= 1e-10 and slowest <= 60.0
    return CheckResult("1 exact conservation", ok, f"{steps} steps, max drift {worst:.2e} (<=1e-10), " + " ".join(parts))


ORDER_SWEEP_LOW = (0.02, 0.01, 0.005, 0.0025)
ORDER_SWEEP_HIGH = (0.2, 0.1, 0.05, 0.025)


def order_retention(quick: bool = False) -> CheckResult:
    low = ORDER_SWEEP_LOW[:3] if quick else ORDER_SWEEP_LOW
    specs = [
        ("RK2Proj123", "rk2", low, lambda s: abs(s - 2) <= 0.3),
        ("RK4Proj123", "rk4", low, lambda s: abs(s - 4) <= 0.3),
        ("RK5Proj123", "rk5", ORDER_SWEEP_HIGH, lambda s: s >= 4.5),
        ("RK7Proj123", "rk7", ORDER_SWEEP_HIGH, lambda s: s >= 6.0),
    ]
    ok, parts = True, []
    for label, tab, hs, accept in specs:
        st = order_study(RunConfig(method="scheme_a", tableau=tab, invariants=(1, 2, 3)), hs)
        good = st.fitted and accept(st.slope)
        ok &= good
        parts.append(f"{label} slope {st.slope:.2f}")
    return CheckResult("2 order retention", ok, ", ".join(parts))


def local_coordinates(quick: bool = False) -> CheckResult:
    hs = ORDER_SWEEP_HIGH[:3] if quick else ORDER_SWEEP_LOW
    st = order_study(RunConfig(method="local", tableau="rk4", invariants=(1, 2, 3)), hs)
    steps = 100 if quick else 1000
    traj = run(RunConfig(method="local", tableau="rk4", invariants=(1, 2), h=0.1, steps=steps))
    dev = float(traj.max_deviation().max()) if traj.complete else math.inf
    ok = st.fitted and abs(st.slope - 4) <= 0.3 and dev <= 1e-10
    return CheckResult("3 local coordinates", ok, f"slope {st.slope:.2f} (4+-0.3), drift over {steps} steps {dev:.2e}")


def _apocentre_indices(r: np.ndarray) -> list[int]:
    return [i for i in range(1, r.size - 1) if r[i] > r[i - 1] and r[i] >= r[i + 1]]


def spiral_anchors(quick: bool = False) -> CheckResult:
    """Plain RK4 spirals inward while RK4Proj13 holds H1 and H3."""
    steps = 500
    prob = kepler_problem(0.6)
    tab = get_tableau("rk4")
    ys = [prob.initial_state]
    for _ in range(steps):
        ys.append(rk_flow(tab, prob.field, ys[-1], 0.2))
    ys = np.array(ys)
    r = np.hypot(ys[:, 0], ys[:, 1])
    apo = _apocentre_indices(r)
    bounds = [0, *apo, steps]
    minima = np.array([r[a:b + 1].min() for a, b in zip(bounds[:-1], bounds[1:])])
    trend = np.polyfit(np.arange(minima.size), minima, 1)[0]
    spiral = bool(np.all(np.diff(r[apo]) < 0))
    h1 = np.array([KEPLER_INVARIANTS[0].value(y) for y in ys])
    energy_drops = h1[apo[len(apo) // 2]] < h1[0]
    traj = run(RunConfig(method="RK4Proj13", h=0.2, steps=steps))
    dev = float(traj.max_deviation().max()) if traj.complete else math.inf
    ok = trend < 0 and minima[-1] < minima[0] and spiral and energy_drops and dev <= 1e-10
    return CheckResult(
        "4 inward spiral vs projection", ok,
        f"RK4 perihelion trend {trend:+.2e}/orbit ({minima[0]:.3f}->{minima[-1]:.3f}), "
        f"apocentres decreasing={spiral}; RK4Proj13 drift {dev:.2e}",
    )


def random_qr_instance(rng: np.random.Generator, m: int, q: int):
    Y = rng.standard_normal((m, q))
    return Y, rng.standard_normal((m, q)), rng.standard_normal(m)


def dq_fd_error(Y, DY, x, eps: float = FD_EPS) -> float:
    fac, dfac = linalg.householder_qr_with_derivative(Y, DY)
    got = linalg.apply_dq(fac, dfac, x)
    plus = linalg.apply_q(linalg.householder_qr(Y + eps * DY), x)
    minus = linalg.apply_q(linalg.householder_qr(Y - eps * DY), x)
    return _rel(got, (plus - minus) / (2 * eps))


def qr_flops(m: int, q: int, seed: int = 0) -> tuple[int, int]:
    rng = np.random.default_rng(seed)
    Y, DY, x = random_qr_instance(rng, m, q)
    c1, c2 = linalg.OpCounter(), linalg.OpCounter()
    fac, dfac = linalg.householder_qr_with_derivative(Y, DY, counter=c1)
    linalg.apply_dq(fac, dfac, x, counter=c2)
    return c1.flops, c2.flops


def qr_derivative(quick: bool = False, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    n = 20 if quick else 100
    worst = 0.0
    for _ in range(n):
        m = int(rng.integers(2, 9))
        q = int(rng.integers(1, min(3, m) + 1))
        worst = max(worst, dq_fd_error(*random_qr_instance(rng, m, q)))
    q = 3
    ratios_qr, ratios_dq = [], []
    for m in (8, 16, 32):
        f_qr, f_dq = qr_flops(m, q)
        ratios_qr.append(f_qr / (m * q * q + q**3))
        ratios_dq.append(f_dq / (m * q))
    spread_qr = max(ratios_qr) / min(ratios_qr)
    spread_dq = max(ratios_dq) / min(ratios_dq)
    ok = worst <= 1e-6 and spread_qr <= 2 and spread_dq <= 2
    return CheckResult(
        "5 derivative-propagating QR", ok,
        f"{n} instances, worst rel err {worst:.1e}; flop/model spread qr {spread_qr:.2f}, dq {spread_dq:.2f} (<=2)",
    )


def random_kepler_pair(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two states away from the collision singularity, a moderate distance apart."""
    def state():
        rad = rng.uniform(0.5, 1.5)
        ang = rng.uniform(0, 2 * np.pi)
        return np.array([rad * np.cos(ang), rad * np.sin(ang), *rng.uniform(-1.5, 1.5, 2)])
    v = state()
    u = v + rng.uniform(-0.3, 0.3, 4)
    while np.hypot(u[0], u[1]) < 0.3:
        u = v + rng.uniform(-0.3, 0.3, 4)
    return v, u


def fd_jacobian_in_u(g, H, v, u, eps: float = FD_EPS) -> np.ndarray:
    cols = []
    for j in range(u.size):
        e = np.zeros(u.size)
        e[j] = eps
        cols.append((g(H, v, u + e) - g(H, v, u - e)) / (2 * eps))
    return np.column_stack(cols)


def jacobians(quick: bool = False, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    n = 20 if quick else 100
    worst_ci = worst_sci = 0.0
    for _ in range(n):
        v, u = random_kepler_pair(rng)
        for H in KEPLER_INVARIANTS:
            worst_ci = max(worst_ci, _rel(ci_gradient_jacobian(H, v, u), fd_jacobian_in_u(ci_gradient, H, v, u)))
            worst_sci = max(worst_sci, _rel(sci_gradient_jacobian(H, v, u), fd_jacobian_in_u(sci_gradient, H, v, u)))
    ok = worst_ci <= 1e-6 and worst_sci <= 1e-6
    return CheckResult("6 CI/SCI Jacobians", ok, f"{n} pairs x 4 invariants, worst rel err CI {worst_ci:.1e}, SCI {worst_sci:.1e}")


def scheme_equivalence(quick: bool = False) -> CheckResult:
    prob = kepler_problem(0.6)
    y = prob.initial_state
    worst = 0.0
    for tab in ("euler", "rk2", "rk4", "rk5"):
        for subset in ((0,), (0, 1), (0, 1, 2)):
            a = scheme_a_step(ProjectionMethodConfig("scheme_a", get_tableau(tab), subset), prob, y, 0.1).state
            b = scheme_b_step(ProjectionMethodConfig("scheme_b", get_tableau(tab), subset), prob, y, 0.1).state
            worst = max(worst, float(np.max(np.abs(a - b))))
    mid = get_tableau("implicit_midpoint")
    a = scheme_a_step(ProjectionMethodConfig("scheme_a", mid, (0, 1)), prob, y, 0.1).state
    b = scheme_b_step(ProjectionMethodConfig("scheme_b", mid, (0, 1)), prob, y, 0.1).state
    gap = float(np.linalg.norm(a - b))
    ok = worst <= 1e-13 and gap > 1e-8
    return CheckResult("7 scheme equivalence/distinction", ok, f"explicit |A-B| {worst:.1e} (<=1e-13), midpoint |A-B| {gap:.2e} (>1e-8)")


def symmetry(quick: bool = False) -> CheckResult:
    prob = kepler_problem(0.6)
    cfg = ProjectionMethodConfig("scheme_b", get_tableau("implicit_midpoint"), (0, 1, 2))
    worst = 0.0
    y = prob.initial_state
    for _ in range(3 if quick else 10):
        y1 = scheme_b_step(cfg, prob, y, 0.1).state
        back = scheme_b_step(cfg, prob, y1, -0.1).state
        worst = max(worst, float(np.linalg.norm(back - y)))
        y = y1
    return CheckResult("8 scheme B symmetry", worst <= 1e-10, f"|B_-h(B_h(y)) - y| {worst:.1e} (<=1e-10)")


def comparison(quick: bool = False) -> CheckResult:
    steps = 100 if quick else 1000
    common = dict(tableau="implicit_midpoint", invariants=(1, 2), h=0.1, steps=steps, e=0.6)
    report = compare_standard(RunConfig(method="scheme_a", **common), RunConfig(method="standard", **common))
    devs = [max(r["max_dev"].values()) for r in report["rows"]]
    complete = all(r["complete"] for r in report["rows"])
    iters = [r["solver_iters"] for r in report["rows"]]
    ok = complete and max(devs) <= 1e-10 and all(i > 0 for i in iters)
    errs = ", ".join(f"{r['slot']} err {r['final_error']:.3f} in {r['wall_time_s']:.1f}s" for r in report["rows"])
    return CheckResult(
        "9 comparison harness", ok,
        f"drift scheme A {devs[0]:.1e}, standard {devs[1]:.1e}; solver iters {iters[0]} vs {iters[1]}; {errs}",
    )


ALL_CHECKS = (
    conservation,
    order_retention,
    local_coordinates,
    spiral_anchors,
    qr_derivative,
    jacobians,
    scheme_equivalence,
    symmetry,
    comparison,
)


def run_checks(quick: bool = False, echo=print) -> list[CheckResult]:
    results = []
    for chk in ALL_CHECKS:
        t0 = time.perf_counter()
        res = chk(quick)
        res.detail += f" [{time.perf_counter() - t0:.1f}s]"
        results.append(res)
        if echo:
            echo(res.line())
    return results
