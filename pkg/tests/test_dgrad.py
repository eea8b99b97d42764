import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgint import dgrad
from dgint.checks import fd_jacobian_in_u, random_kepler_pair
from dgint.dgrad import DiscreteGradient, Invariant, assemble_DY, assemble_Y
from dgint.problems import KEPLER_INVARIANTS

H1, H2, H3, H4 = KEPLER_INVARIANTS

PRODUCT = Invariant("y1y2", lambda y: y[0] * y[1], lambda y: np.array([y[1], y[0]]))
HALF_NORM = Invariant("half_norm", lambda y: 0.5 * float(y @ y), lambda y: np.array(y, dtype=float), lambda y: np.eye(len(y)))


def quadratic(A):
    A = np.asarray(A, dtype=float)
    return Invariant("quad", lambda y: 0.5 * y @ A @ y, lambda y: A @ y, lambda y: A)


def smooth_nonpolynomial():
    def val(y):
        return np.exp(0.3 * y[0]) * np.sin(y[1]) + y[2] ** 3 * y[0]

    def grad(y):
        return np.array([
            0.3 * np.exp(0.3 * y[0]) * np.sin(y[1]) + y[2] ** 3,
            np.exp(0.3 * y[0]) * np.cos(y[1]),
            3 * y[2] ** 2 * y[0],
        ])

    return Invariant("smooth", val, grad)


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# --- AVF ---------------------------------------------------------------------


@pytest.mark.parametrize("nodes", [1, 2, 8])
def test_avf_quadratic_is_midpoint_gradient(nodes, rng):
    v, u = rng.standard_normal(4), rng.standard_normal(4)
    np.testing.assert_allclose(dgrad.avf_gradient(HALF_NORM, v, u, nodes), 0.5 * (u + v), atol=1e-15)


def test_avf_consistency(rng):
    u = np.array([0.4, 0.1, -0.2, 1.9])
    np.testing.assert_allclose(dgrad.avf_gradient(H1, u, u), H1.gradient(u), rtol=1e-14)


def test_avf_kepler_against_dense_trapezoid():
    v = np.array([0.4, 0, 0, 2.0])
    u = np.array([0.5, 0.1, -0.1, 1.9])
    s = np.linspace(0.0, 1.0, 10001)
    vals = np.array([H1.gradient(v + si * (u - v)) for si in s])
    oracle = np.trapezoid(vals, s, axis=0) if hasattr(np, "trapezoid") else np.trapz(vals, s, axis=0)
    np.testing.assert_allclose(dgrad.avf_gradient(H1, v, u, nodes=10), oracle, atol=1e-9)


def test_avf_symmetry(rng):
    for _ in range(20):
        v, u = random_kepler_pair(rng)
        np.testing.assert_allclose(dgrad.avf_gradient(H3, v, u), dgrad.avf_gradient(H3, u, v), rtol=0, atol=1e-14)


def test_avf_derivative_quadratic(rng):
    A = rng.standard_normal((3, 3))
    A = A + A.T
    H = quadratic(A)
    v, u, z = rng.standard_normal((3, 3))
    np.testing.assert_allclose(dgrad.avf_gradient_derivative(H, v, u, z), A @ z / 2, atol=1e-14)
    np.testing.assert_array_equal(dgrad.avf_gradient_derivative(H, v, u, np.zeros(3)), 0.0)


def test_avf_derivative_vs_fd(rng):
    for _ in range(10):
        v, u = random_kepler_pair(rng)
        z = rng.standard_normal(4)
        eps = 1e-6
        fd = (dgrad.avf_gradient(H1, v, u + eps * z) - dgrad.avf_gradient(H1, v, u - eps * z)) / (2 * eps)
        assert _rel(dgrad.avf_gradient_derivative(H1, v, u, z), fd) <= 1e-6


def test_avf_derivative_needs_hessian():
    with pytest.raises(dgrad.MissingHessianError):
        dgrad.avf_gradient_derivative(PRODUCT, [1.0, 1.0], [3.0, 2.0], [1.0, 0.0])
    out = dgrad.avf_gradient_derivative(PRODUCT, [1.0, 1.0], [3.0, 2.0], [1.0, 0.0], allow_fd=True)
    np.testing.assert_allclose(out, [0.0, 0.5], atol=1e-8)


# --- coordinate increment ------------------------------------------------------


def test_ci_product_hand_value():
    v, u = np.array([1.0, 1.0]), np.array([3.0, 2.0])
    g = dgrad.ci_gradient(PRODUCT, v, u)
    np.testing.assert_allclose(g, [1.0, 3.0])
    assert g @ (u - v) == pytest.approx(PRODUCT.value(u) - PRODUCT.value(v))


def test_sci_product_hand_value():
    v, u = np.array([1.0, 1.0]), np.array([3.0, 2.0])
    # ci(u, v) = ((H(1,2) - H(3,2)) / -2, (H(1,1) - H(1,2)) / -1) = (2, 1)
    np.testing.assert_allclose(dgrad.ci_gradient(PRODUCT, u, v), [2.0, 1.0])
    g = dgrad.sci_gradient(PRODUCT, v, u)
    np.testing.assert_allclose(g, [1.5, 2.0])
    assert g @ (u - v) == pytest.approx(5.0)


@pytest.mark.parametrize("fn", [dgrad.ci_gradient, dgrad.sci_gradient])
def test_ci_consistency(fn, rng):
    for _ in range(20):
        u, _ = random_kepler_pair(rng)
        for H in KEPLER_INVARIANTS:
            g = H.gradient(u)
            assert np.linalg.norm(fn(H, u, u) - g) <= 1e-10 * (1 + np.linalg.norm(g))


def test_ci_one_equal_coordinate_is_partial_at_mixed_point():
    H = smooth_nonpolynomial()
    v = np.array([0.2, 0.7, -0.4])
    u = np.array([0.9, 0.7, 0.3])
    # coordinate 2 is unchanged: the component is dH/dy2 at z_1 = (u1, v2, v3)
    z1 = np.array([u[0], v[1], v[2]])
    eps = 1e-6
    fd = (H.value(z1 + [0, eps, 0]) - H.value(z1 - [0, eps, 0])) / (2 * eps)
    assert dgrad.ci_gradient(H, v, u)[1] == pytest.approx(fd, abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["ci", "sci"]))
def test_defining_identity(seed, kind):
    v, u = random_kepler_pair(np.random.default_rng(seed))
    dg = DiscreteGradient(kind)
    for H in KEPLER_INVARIANTS:
        hu, hv = H.value(u), H.value(v)
        assert abs(hu - hv - dg(H, v, u) @ (u - v)) <= 1e-13 * (1 + abs(hu) + abs(hv))


def test_defining_identity_with_near_equal_coordinates(rng):
    # one coordinate inside the degenerate band
    for _ in range(50):
        v, u = random_kepler_pair(rng)
        i = rng.integers(4)
        u[i] = v[i] + rng.uniform(-1e-3, 1e-3) * 10.0 ** -rng.integers(0, 8)
        for H in KEPLER_INVARIANTS:
            hu, hv = H.value(u), H.value(v)
            for fn in (dgrad.ci_gradient, dgrad.sci_gradient):
                assert abs(hu - hv - fn(H, v, u) @ (u - v)) <= 1e-13 * (1 + abs(hu) + abs(hv))


def test_sci_symmetry(rng):
    for _ in range(20):
        v, u = random_kepler_pair(rng)
        for H in KEPLER_INVARIANTS:
            np.testing.assert_allclose(dgrad.sci_gradient(H, v, u), dgrad.sci_gradient(H, u, v), rtol=1e-14, atol=1e-15)


# --- Jacobians ----------------------------------------------------------------


def test_ci_jacobian_product():
    v, u = np.array([1.0, 1.0]), np.array([3.0, 2.0])
    J = dgrad.ci_gradient_jacobian(PRODUCT, v, u)
    fd = fd_jacobian_in_u(dgrad.ci_gradient, PRODUCT, v, u)
    assert _rel(J, fd) <= 1e-6
    assert J[0, 1] == 0.0


def test_ci_jacobian_linear_is_zero(rng):
    c = rng.standard_normal(3)
    H = Invariant("lin", lambda y: c @ y, lambda y: c, lambda y: np.zeros((3, 3)))
    v, u = rng.standard_normal((2, 3))
    np.testing.assert_allclose(dgrad.ci_gradient_jacobian(H, v, u), 0.0, atol=1e-12)
    np.testing.assert_allclose(dgrad.sci_gradient_jacobian(H, v, u), 0.0, atol=1e-12)


def test_ci_jacobian_lower_triangular(rng):
    v, u = random_kepler_pair(rng)
    J = dgrad.ci_gradient_jacobian(H3, v, u)
    np.testing.assert_array_equal(np.triu(J, 1), 0.0)


@pytest.mark.parametrize("fn,jac", [
    (dgrad.ci_gradient, dgrad.ci_gradient_jacobian),
    (dgrad.sci_gradient, dgrad.sci_gradient_jacobian),
])
def test_jacobians_vs_fd_on_kepler(fn, jac, rng):
    for _ in range(25):
        v, u = random_kepler_pair(rng)
        for H in KEPLER_INVARIANTS:
            assert _rel(jac(H, v, u), fd_jacobian_in_u(fn, H, v, u)) <= 1e-6


def test_sci_jacobian_smooth_without_hessian(rng):
    H = smooth_nonpolynomial()
    v, u = rng.uniform(-1, 1, (2, 3))
    assert _rel(dgrad.sci_gradient_jacobian(H, v, u), fd_jacobian_in_u(dgrad.sci_gradient, H, v, u)) <= 1e-6


def test_sci_jacobian_quadratic_symbolic(rng):
    # H = 1/2 y^T A y; along the chain z_i the CI components are exact linear
    # functions, so the Jacobian is a fixed matrix built from A.
    A = rng.standard_normal((3, 3))
    A = A + A.T
    H = quadratic(A)
    v, u = rng.standard_normal((2, 3))
    # ci(a, b)_i = A_ii (a_i + b_i)/2 + sum_{j<i} A_ij b_j + sum_{j>i} A_ij a_j
    Jb = np.tril(A, -1) + np.diag(np.diag(A)) / 2  # d ci(v, u) / du
    Ja = np.triu(A, 1) + np.diag(np.diag(A)) / 2  # d ci(u, v) / du
    np.testing.assert_allclose(dgrad.ci_gradient_jacobian(H, v, u), Jb, atol=1e-10)
    np.testing.assert_allclose(dgrad.sci_gradient_jacobian(H, v, u), 0.5 * (Jb + Ja), atol=1e-10)


def test_sci_jacobian_near_diagonal(rng):
    for _ in range(10):
        v, _ = random_kepler_pair(rng)
        u = v + 1e-4 * rng.standard_normal(4)
        for H in KEPLER_INVARIANTS:
            J = dgrad.sci_gradient_jacobian(H, v, u)
            fd = fd_jacobian_in_u(dgrad.sci_gradient, H, v, u)
            assert np.max(np.abs(J - fd)) <= 1e-5


def test_sci_jacobian_at_diagonal_is_half_hessian(rng):
    v, _ = random_kepler_pair(rng)
    np.testing.assert_allclose(dgrad.sci_gradient_jacobian(H1, v, v), 0.5 * H1.hessian(v), atol=1e-10)


# --- strategy and assembly -------------------------------------------------------


def test_strategy_rejects_unknown_kind():
    with pytest.raises(ValueError):
        DiscreteGradient("nope")
    with pytest.raises(ValueError):
        DiscreteGradient("avf", nodes=0)


def test_assemble_Y_quadratic_avf(rng):
    v, u = rng.standard_normal((2, 4))
    Y = assemble_Y(DiscreteGradient("avf"), [HALF_NORM], v, u)
    assert Y.shape == (4, 1)
    np.testing.assert_allclose(Y[:, 0], 0.5 * (u + v), atol=1e-15)


def test_assemble_Y_diagonal_gives_exact_gradients():
    y0 = np.array([0.4, 0.0, 0.0, 2.0])
    for kind in ("avf", "ci", "sci"):
        Y = assemble_Y(DiscreteGradient(kind), [H1, H2], y0, y0)
        np.testing.assert_allclose(Y, np.column_stack([H1.gradient(y0), H2.gradient(y0)]), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("kind", ["avf", "ci", "sci"])
def test_assemble_DY_vs_fd(kind, rng):
    dg = DiscreteGradient(kind)
    for _ in range(5):
        v, u = random_kepler_pair(rng)
        z = rng.standard_normal(4)
        eps = 1e-6
        fd = (assemble_Y(dg, KEPLER_INVARIANTS, v, u + eps * z) - assemble_Y(dg, KEPLER_INVARIANTS, v, u - eps * z)) / (2 * eps)
        assert _rel(assemble_DY(dg, KEPLER_INVARIANTS, v, u, z), fd) <= 1e-6


def test_assemble_requires_invariants():
    with pytest.raises(ValueError):
        assemble_Y(DiscreteGradient(), [], [1.0], [1.0])


def test_gauss_legendre_integrates_polynomials():
    x, w = dgrad.gauss_legendre(4)
    assert w.sum() == pytest.approx(1.0)
    assert w @ x**7 == pytest.approx(1 / 8)
