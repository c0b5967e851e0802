"""
Second-order forward-mode differentiation with hyper-dual scalars, and the
small dense solver used to invert velocity Hessians.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .expr import (
    DomainError, Expr, UnboundIdentifier, VarLayout, _unary_fn, binding,
    integral_exponent, ipow,
)

MAX_DIM = 16
SINGULAR_RTOL = 1e-12


class SingularMatrix(ArithmeticError):
    """Pivot fell below the relative singularity threshold."""

    def __init__(self, pivot_index: int, pivot: float, threshold: float):
        super().__init__(
            f"singular matrix: pivot {pivot_index} has magnitude {abs(pivot):.3e} "
            f"< threshold {threshold:.3e}"
        )
        self.pivot_index = pivot_index
        self.pivot = pivot
        self.threshold = threshold


@lru_cache(maxsize=None)
def _triu(k: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(k)


def pack(h: np.ndarray) -> np.ndarray:
    """Upper triangle of a square matrix, row-major."""
    i, j = _triu(h.shape[0])
    return h[i, j].copy()


def unpack(hp: np.ndarray, k: int) -> np.ndarray:
    i, j = _triu(k)
    h = np.empty((k, k))
    h[i, j] = hp
    h[j, i] = hp
    return h


def _sym_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # packed (a b^T + b a^T)
    i, j = _triu(a.shape[0])
    return a[i] * b[j] + a[j] * b[i]


def _sq_outer(a: np.ndarray) -> np.ndarray:
    i, j = _triu(a.shape[0])
    return a[i] * a[j]


class HyperDual:
    """Scalar carrying its gradient and Hessian with respect to ``k`` seeds.

    The Hessian is stored packed (upper triangle), so symmetry is exact.
    Arithmetic mixes freely with plain floats, which stand for constants.
    """

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray, hess: np.ndarray):
        self.value = float(value)
        self.grad = grad
        self.hess = hess

    @property
    def k(self) -> int:
        return self.grad.shape[0]

    @classmethod
    def constant(cls, value: float, k: int) -> "HyperDual":
        return cls(value, np.zeros(k), np.zeros(k * (k + 1) // 2))

    @classmethod
    def seed(cls, value: float, index: int, k: int) -> "HyperDual":
        g = np.zeros(k)
        g[index] = 1.0
        return cls(value, g, np.zeros(k * (k + 1) // 2))

    def hessian(self) -> np.ndarray:
        return unpack(self.hess, self.k)

    def _check(self, other: "HyperDual") -> None:
        if other.grad.shape != self.grad.shape:
            raise ValueError(f"hyper-dual size mismatch: {self.k} vs {other.k}")

    def __repr__(self) -> str:
        return f"HyperDual({self.value!r}, grad={self.grad!r}, hess={self.hessian()!r})"

    def __neg__(self):
        return HyperDual(-self.value, -self.grad, -self.hess)

    def __add__(self, o):
        if isinstance(o, HyperDual):
            self._check(o)
            return HyperDual(self.value + o.value, self.grad + o.grad, self.hess + o.hess)
        return HyperDual(self.value + o, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, HyperDual):
            self._check(o)
            return HyperDual(self.value - o.value, self.grad - o.grad, self.hess - o.hess)
        return HyperDual(self.value - o, self.grad, self.hess)

    def __rsub__(self, o):
        return HyperDual(o - self.value, -self.grad, -self.hess)

    def __mul__(self, o):
        if isinstance(o, HyperDual):
            self._check(o)
            a, b = self, o
            return HyperDual(
                a.value * b.value,
                a.value * b.grad + b.value * a.grad,
                a.value * b.hess + b.value * a.hess + _sym_outer(a.grad, b.grad),
            )
        return HyperDual(self.value * o, self.grad * o, self.hess * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, HyperDual):
            return self * o.reciprocal()
        return HyperDual(self.value / o, self.grad / o, self.hess / o)

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def chain(self, f: float, df: float, d2f: float) -> "HyperDual":
        """Compose with a scalar function given f, f', f'' at ``self.value``."""
        return HyperDual(f, df * self.grad, df * self.hess + d2f * _sq_outer(self.grad))

    def reciprocal(self) -> "HyperDual":
        x = self.value
        if x == 0.0:
            raise ZeroDivisionError
        r = 1.0 / x
        return self.chain(r, -r * r, 2.0 * r * r * r)


# --------------------------------------------------------------------------
# expression evaluation

def _derivs(name: str, x: float, node: Expr) -> tuple[float, float, float]:
    if name == "sin":
        s, c = math.sin(x), math.cos(x)
        return s, c, -s
    if name == "cos":
        s, c = math.sin(x), math.cos(x)
        return c, -s, -c
    if name == "tan":
        t = _unary_fn("tan", x, node)
        sec2 = 1.0 + t * t
        return t, sec2, 2.0 * t * sec2
    if name == "exp":
        v = _unary_fn("exp", x, node)
        return v, v, v
    if name == "log":
        v = _unary_fn("log", x, node)
        return v, 1.0 / x, -1.0 / (x * x)
    if name == "sqrt":
        if x <= 0.0:
            raise DomainError("derivative of sqrt at a non-positive number", node)
        r = math.sqrt(x)
        return r, 0.5 / r, -0.25 / (r * x)
    if name == "abs":
        if x == 0.0:
            raise DomainError("derivative of abs at 0", node)
        sg = 1.0 if x > 0 else -1.0
        return abs(x), sg, 0.0
    raise DomainError(f"unknown function {name!r}", node)


def _int_pow_hd(a: HyperDual, n: int, node: Expr) -> HyperDual:
    x = a.value
    if n == 0:
        return HyperDual.constant(1.0, a.k)
    try:
        f = ipow(x, n)
        df = n * ipow(x, n - 1) if n != 0 else 0.0
        d2f = n * (n - 1) * ipow(x, n - 2) if n not in (0, 1) else 0.0
    except ZeroDivisionError:
        raise DomainError("zero raised to a negative power", node) from None
    return a.chain(f, df, d2f)


def _hd(e: Expr, env: Mapping[str, object]):
    k = e.kind
    if k == "const":
        return e.value
    if k in ("var", "param"):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundIdentifier(e.name) from None
    if k == "unary":
        return -_hd(e.children[0], env)
    if k == "binary":
        a = _hd(e.children[0], env)
        b = _hd(e.children[1], env)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        bv = b.value if isinstance(b, HyperDual) else b
        if bv == 0.0:
            raise DomainError("division by zero", e)
        return a / b
    if e.name == "pow":
        a = _hd(e.children[0], env)
        b = _hd(e.children[1], env)
        return _pow(a, b, e)
    a = _hd(e.children[0], env)
    if not isinstance(a, HyperDual):
        return _unary_fn(e.name, a, e)
    return a.chain(*_derivs(e.name, a.value, e))


def _pow(a, b, node: Expr):
    from .expr import real_pow

    b_const = not isinstance(b, HyperDual) or (not b.grad.any() and not b.hess.any())
    bv = b.value if isinstance(b, HyperDual) else b
    if not isinstance(a, HyperDual) and not isinstance(b, HyperDual):
        return real_pow(a, b, node)
    if b_const:
        n = integral_exponent(bv)
        if n is not None:
            if not isinstance(a, HyperDual):
                return real_pow(a, bv, node)
            return _int_pow_hd(a, n, node)
    av = a.value if isinstance(a, HyperDual) else a
    if av <= 0.0:
        raise DomainError("non-integer power of a non-positive base", node)
    if b_const:
        y = bv
        f = math.exp(y * math.log(av))
        return a.chain(f, y * f / av, y * (y - 1.0) * f / (av * av))
    # x^y = exp(y log x)
    la = a.chain(math.log(av), 1.0 / av, -1.0 / (av * av)) if isinstance(a, HyperDual) else math.log(av)
    z = b * la
    f = math.exp(z.value)
    return z.chain(f, f, f)


def eval_hyperdual(e: Expr, layout: VarLayout | Sequence[str], point,
                   active: Iterable[str] | None = None,
                   params: Mapping[str, float] | None = None) -> HyperDual:
    """Value, gradient and Hessian of ``e`` with respect to ``active`` names.

    ``active`` defaults to the whole layout; gradient entries follow the
    order of ``active``.
    """
    names = layout.names if isinstance(layout, VarLayout) else tuple(layout)
    active = tuple(names if active is None else active)
    unknown = set(active) - set(names)
    if unknown:
        raise ValueError(f"active names not in layout: {sorted(unknown)}")
    env: dict[str, object] = binding(names, point, params)
    kk = len(active)
    for i, n in enumerate(active):
        env[n] = HyperDual.seed(env[n], i, kk)
    out = _hd(e, env)
    if not isinstance(out, HyperDual):
        out = HyperDual.constant(out, kk)
    return out


def jet(exprs: Sequence[Expr], layout, point, active=None, params=None) -> list[HyperDual]:
    """``eval_hyperdual`` for several expressions sharing one binding."""
    names = layout.names if isinstance(layout, VarLayout) else tuple(layout)
    active = tuple(names if active is None else active)
    env: dict[str, object] = binding(names, point, params)
    kk = len(active)
    for i, n in enumerate(active):
        env[n] = HyperDual.seed(env[n], i, kk)
    out = []
    for e in exprs:
        r = _hd(e, env)
        out.append(r if isinstance(r, HyperDual) else HyperDual.constant(r, kk))
    return out


# --------------------------------------------------------------------------
# dense linear algebra

def solve(A, b, *, rtol: float = SINGULAR_RTOL, max_dim: int = MAX_DIM) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    Raises :class:`SingularMatrix` when a pivot magnitude drops below
    ``rtol`` times the largest absolute row sum of ``A``. ``b`` may be a
    vector or a matrix of right-hand sides.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if n > max_dim:
        raise ValueError(f"dimension {n} exceeds the configured cap {max_dim}")
    if b.shape[0] != n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {n}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    vec = b.ndim == 1
    B = b.reshape(n, -1).copy()
    scale = np.abs(A).sum(axis=1).max() if n else 0.0
    threshold = rtol * scale
    for c in range(n):
        piv = c + int(np.argmax(np.abs(A[c:, c])))
        if abs(A[piv, c]) <= threshold or A[piv, c] == 0.0:
            raise SingularMatrix(c, A[piv, c], threshold)
        if piv != c:
            A[[c, piv]] = A[[piv, c]]
            B[[c, piv]] = B[[piv, c]]
        f = A[c + 1:, c] / A[c, c]
        A[c + 1:, c:] -= np.outer(f, A[c, c:])
        B[c + 1:] -= np.outer(f, B[c])
    X = np.empty_like(B)
    for r in range(n - 1, -1, -1):
        X[r] = (B[r] - A[r, r + 1:] @ X[r + 1:]) / A[r, r]
    return X[:, 0] if vec else X


def inverse(A, **kw) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return solve(A, np.eye(A.shape[0]), **kw)
