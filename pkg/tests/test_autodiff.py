import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mechkit.autodiff import HyperDual, SingularMatrix, eval_hyperdual, inverse, pack, solve, unpack
from mechkit.expr import Expr, const, parse, var

from conftest import np_eval

NAMES = ("x", "y", "z")


def random_expr(rng, depth: int) -> Expr:
    """Smooth expression over x, y, z that is finite on all of R^3."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.7:
            return var(NAMES[rng.integers(3)])
        return const(round(float(rng.uniform(-2, 2)), 3))
    kind = rng.integers(9)
    sub = lambda: random_expr(rng, depth - 1)  # noqa: E731
    if kind < 3:
        return Expr("binary", (sub(), sub()), op="+-*"[kind])
    if kind == 3:  # division by a strictly positive denominator
        den = Expr("binary", (const(1.0), Expr("call", (sub(), const(2.0)), name="pow")), op="+")
        return Expr("binary", (sub(), den), op="/")
    if kind == 4:
        return Expr("call", (sub(), const(float(rng.integers(2, 4)))), name="pow")
    if kind == 5:
        return Expr("call", (sub(),), name=("sin", "cos")[rng.integers(2)])
    if kind == 6:
        return Expr("call", (Expr("call", (sub(),), name="sin"),), name="exp")
    if kind == 7:
        inner = Expr("binary", (const(1.0), Expr("call", (sub(), const(2.0)), name="pow")), op="+")
        return Expr("call", (inner,), name=("sqrt", "log")[rng.integers(2)])
    return Expr("unary", (sub(),), op="-")


def fd_reference(e: Expr, x: np.ndarray, hg: float = 1e-6, hh: float = 1e-4):
    """Central-difference gradient and Hessian from the numpy oracle."""
    k = len(x)

    def f(pts):
        out = np.asarray(np_eval(e, dict(zip(NAMES, pts.T))), dtype=float)
        return np.broadcast_to(out, (len(pts),))

    I = np.eye(k)
    sg = hg * np.maximum(1.0, np.abs(x))
    grad = (f(x + sg[:, None] * I) - f(x - sg[:, None] * I)) / (2 * sg)
    sh = hh * np.maximum(1.0, np.abs(x))
    H = np.empty((k, k))
    f0 = f(x[None, :])[0]
    for i in range(k):
        ei = sh[i] * I[i]
        H[i, i] = (f(np.array([x + ei]))[0] - 2 * f0 + f(np.array([x - ei]))[0]) / sh[i] ** 2
        for j in range(i + 1, k):
            ej = sh[j] * I[j]
            pts = np.array([x + ei + ej, x + ei - ej, x - ei + ej, x - ei - ej])
            v = f(pts)
            H[i, j] = H[j, i] = (v[0] - v[1] - v[2] + v[3]) / (4 * sh[i] * sh[j])
    return f0, grad, H


def test_ad_matches_finite_differences_on_10000_pairs():
    rng = np.random.default_rng(2024)
    n_expr, per_expr = 500, 20
    worst_g = worst_h = 0.0
    for _ in range(n_expr):
        e = random_expr(rng, 4)
        for _ in range(per_expr):
            x = rng.uniform(-1.5, 1.5, 3)
            hd = eval_hyperdual(e, NAMES, x)
            f0, g, H = fd_reference(e, x)
            assert hd.value == pytest.approx(f0, rel=1e-12, abs=1e-12)
            eg = np.max(np.abs(hd.grad - g)) / max(1.0, np.max(np.abs(g)))
            eh = np.max(np.abs(hd.hessian() - H)) / max(1.0, np.max(np.abs(H)))
            worst_g, worst_h = max(worst_g, eg), max(worst_h, eh)
    assert worst_g <= 1e-6, worst_g
    assert worst_h <= 1e-4, worst_h


def test_bilinear_jet():
    hd = eval_hyperdual(parse("q*v", ["q", "v"]), ["q", "v"], [2.0, 3.0])
    assert hd.value == 6.0
    np.testing.assert_array_equal(hd.grad, [3.0, 2.0])
    np.testing.assert_array_equal(hd.hessian(), [[0.0, 1.0], [1.0, 0.0]])


def test_active_subset():
    L = parse("0.5*m*v^2 - 0.5*k*q^2", ["q", "v"])
    hd = eval_hyperdual(L, ["q", "v"], [0.3, 2.0], active=["v"], params={"m": 1, "k": 1})
    np.testing.assert_allclose(hd.grad, [2.0])
    np.testing.assert_allclose(hd.hessian(), [[1.0]])


def test_sin_exp_against_fd():
    e = parse("sin(q)*exp(v)", ["q", "v"])
    x = np.array([0.3, 0.7])
    hd = eval_hyperdual(e, ["q", "v"], x)
    f = lambda q, v: np.sin(q) * np.exp(v)  # noqa: E731
    h = 1e-4
    g = [(f(x[0] + h, x[1]) - f(x[0] - h, x[1])) / (2 * h),
         (f(x[0], x[1] + h) - f(x[0], x[1] - h)) / (2 * h)]
    np.testing.assert_allclose(hd.grad, g, rtol=1e-6)
    Hqq = (f(x[0] + h, x[1]) - 2 * f(*x) + f(x[0] - h, x[1])) / h**2
    Hqv = (f(x[0] + h, x[1] + h) - f(x[0] + h, x[1] - h) - f(x[0] - h, x[1] + h)
           + f(x[0] - h, x[1] - h)) / (4 * h * h)
    Hvv = (f(x[0], x[1] + h) - 2 * f(*x) + f(x[0], x[1] - h)) / h**2
    np.testing.assert_allclose(hd.hessian(), [[Hqq, Hqv], [Hqv, Hvv]], rtol=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.data())
def test_pack_unpack_round_trip(k, data):
    vals = data.draw(st.lists(st.floats(-10, 10), min_size=k * k, max_size=k * k))
    A = np.array(vals).reshape(k, k)
    S = A + A.T
    np.testing.assert_array_equal(unpack(pack(S), k), S)


def test_hessian_is_exactly_symmetric():
    e = parse("sin(x*y)*exp(z*x) + x^3*y", NAMES)
    H = eval_hyperdual(e, NAMES, [0.3, -1.2, 0.8]).hessian()
    np.testing.assert_array_equal(H, H.T)


def test_constant_and_seed():
    c = HyperDual.constant(2.0, 3)
    assert c.value == 2.0 and not c.grad.any()
    s = HyperDual.seed(1.5, 1, 3)
    np.testing.assert_array_equal(s.grad, [0, 1, 0])


class TestSolve:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.5])
        np.testing.assert_array_equal(solve(np.eye(3), b), b)

    def test_diagonal(self):
        np.testing.assert_allclose(solve([[2, 0], [0, 4]], [2, 4]), [1, 1])

    def test_singular(self):
        with pytest.raises(SingularMatrix):
            solve([[1, 1], [1, 1]], [1, 2])

    def test_near_singular_by_relative_threshold(self):
        with pytest.raises(SingularMatrix):
            solve([[1e6, 0], [0, 1e-7]], [1, 1])

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            solve(np.eye(17), np.ones(17))

    def test_needs_pivoting(self):
        np.testing.assert_allclose(solve([[0, 1], [1, 0]], [2, 3]), [3, 2])

    def test_matrix_rhs_and_inverse(self):
        A = np.array([[4.0, 1, 0], [1, 3, 1], [0, 1, 2]])
        np.testing.assert_allclose(inverse(A) @ A, np.eye(3), atol=1e-14)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_matches_numpy_on_well_conditioned(self, n, seed):
        r = np.random.default_rng(seed)
        A = r.normal(size=(n, n)) + n * np.eye(n)
        b = r.normal(size=n)
        np.testing.assert_allclose(solve(A, b), np.linalg.solve(A, b), rtol=1e-10, atol=1e-12)
