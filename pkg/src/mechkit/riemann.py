"""
Newtonian mechanics on a Riemannian configuration space.

The metric is a matrix of expressions over the coordinates. All
derivatives (of the metric, hence of the Christoffel symbols) come from a
single hyper-dual pass per entry.

Curvature follows R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^m_jk G^l_im - G^m_ik G^l_jm
with Ricci R_jk = R^i_ijk, which makes the round sphere positively curved.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .autodiff import SingularMatrix, eval_hyperdual, jet, solve
from .expr import Expr, VarLayout, binding, eval_env, parse

Params = Mapping[str, float] | None

SYMMETRY_TOL = 1e-12
CONSTRAINT_TOL = 1e-9


class MetricError(ValueError):
    """Metric is asymmetric, singular or not positive definite at a point."""


class ConstraintError(ValueError):
    """Constraint set is dependent, nonlinear in velocity, or violated."""


@dataclass(frozen=True)
class MetricField:
    coordinates: tuple[str, ...]
    entries: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        n = len(self.coordinates)
        if len(self.entries) != n or any(len(r) != n for r in self.entries):
            raise ValueError(f"metric must be {n}x{n}")

    @property
    def n(self) -> int:
        return len(self.coordinates)

    @classmethod
    def parse(cls, coordinates: Sequence[str], rows) -> "MetricField":
        coords = tuple(coordinates)
        ent = tuple(tuple(e if isinstance(e, Expr) else parse(str(e), coords) for e in r)
                    for r in rows)
        return cls(coords, ent)

    @classmethod
    def diagonal(cls, coordinates: Sequence[str], diag: Sequence[str | Expr]) -> "MetricField":
        n = len(diag)
        rows = [[diag[i] if i == j else "0" for j in range(n)] for i in range(n)]
        return cls.parse(coordinates, rows)

    @classmethod
    def euclidean(cls, coordinates: Sequence[str]) -> "MetricField":
        return cls.diagonal(coordinates, ["1"] * len(coordinates))


@dataclass
class MetricJet:
    g: np.ndarray        # g_ij
    ginv: np.ndarray     # g^ij
    dg: np.ndarray       # dg[m, i, j] = d_m g_ij
    d2g: np.ndarray      # d2g[m, a, i, j] = d_m d_a g_ij


def metric_jet(g: MetricField, q, params: Params = None) -> MetricJet:
    n = g.n
    q = np.asarray(q, dtype=float)
    flat = [g.entries[i][j] for i in range(n) for j in range(n)]
    hds = jet(flat, VarLayout(g.coordinates), q, None, params)
    G = np.array([h.value for h in hds]).reshape(n, n)
    dG = np.array([h.grad for h in hds]).reshape(n, n, n).transpose(2, 0, 1)
    d2G = np.array([h.hessian() for h in hds]).reshape(n, n, n, n).transpose(2, 3, 0, 1)
    scale = max(1.0, float(np.max(np.abs(G))))
    if np.max(np.abs(G - G.T)) > SYMMETRY_TOL * scale:
        raise MetricError(f"metric is not symmetric at q={q.tolist()}")
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise MetricError(f"metric is not positive definite at q={q.tolist()}") from None
    try:
        Ginv = solve(G, np.eye(n))
    except SingularMatrix as exc:
        raise MetricError(f"metric is singular at q={q.tolist()}") from exc
    return MetricJet(G, Ginv, dG, d2G)


def _christoffel_from(mj: MetricJet) -> np.ndarray:
    dG = mj.dg
    # A[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    A = dG + dG.transpose(1, 0, 2) - dG.transpose(1, 2, 0)
    return 0.5 * np.einsum("kl,ijl->kij", mj.ginv, A)


def christoffel(g: MetricField, q, params: Params = None) -> np.ndarray:
    """Levi-Civita symbols, indexed ``G[k, i, j]`` = Gamma^k_ij."""
    return _christoffel_from(metric_jet(g, q, params))


def christoffel_derivative(mj: MetricJet) -> np.ndarray:
    """dG[m, k, i, j] = d_m Gamma^k_ij."""
    dG, d2G, Gi = mj.dg, mj.d2g, mj.ginv
    A = dG + dG.transpose(1, 0, 2) - dG.transpose(1, 2, 0)
    dA = d2G + d2G.transpose(0, 2, 1, 3) - d2G.transpose(0, 2, 3, 1)
    dGinv = -np.einsum("ka,mab,bl->mkl", Gi, dG, Gi)
    return 0.5 * (np.einsum("mkl,ijl->mkij", dGinv, A) + np.einsum("kl,mijl->mkij", Gi, dA))


def geodesic_accel(g: MetricField, q, v, params: Params = None) -> np.ndarray:
    G = christoffel(g, q, params)
    v = np.asarray(v, dtype=float)
    return -np.einsum("kij,i,j->k", G, v, v)


@dataclass(frozen=True)
class ForceField:
    """Contravariant force F^k(q[, v, t]), or the gradient of a potential.

    With ``potential`` set, F^k = -g^kl dV/dq^l and ``components`` is
    ignored. Velocity and time enter through the names in ``velocities``
    and ``time``.
    """

    coordinates: tuple[str, ...]
    components: tuple[Expr, ...] = ()
    potential: Expr | None = None
    velocities: tuple[str, ...] = ()
    time: str = "t"

    def __post_init__(self):
        q = tuple(self.coordinates)
        object.__setattr__(self, "coordinates", q)
        object.__setattr__(self, "velocities", tuple(self.velocities) or tuple("v" + c for c in q))
        if self.potential is None and len(self.components) != len(q):
            raise ValueError(f"force needs {len(q)} components, got {len(self.components)}")

    @property
    def layout(self) -> VarLayout:
        return VarLayout((self.time,) + self.coordinates + self.velocities)

    @property
    def velocity_dependent(self) -> bool:
        from .expr import depends_on
        return any(depends_on(c, self.velocities) for c in self.components)

    @property
    def time_dependent(self) -> bool:
        from .expr import depends_on
        exprs = list(self.components) + ([self.potential] if self.potential is not None else [])
        return any(depends_on(c, [self.time]) for c in exprs)

    @classmethod
    def parse(cls, coordinates: Sequence[str], components: Sequence[str] = (),
              potential: str | None = None, **kw) -> "ForceField":
        q = tuple(coordinates)
        vel = tuple(kw.get("velocities", ())) or tuple("v" + c for c in q)
        names = (kw.get("time", "t"),) + q + vel
        comps = tuple(parse(c, names) for c in components)
        pot = parse(potential, names) if potential is not None else None
        return cls(q, comps, pot, vel, names[0])

    def evaluate(self, q, v, t: float = 0.0, params: Params = None,
                 ginv: np.ndarray | None = None) -> np.ndarray:
        x = np.concatenate([[t], q, v])
        if self.potential is not None:
            grad = eval_hyperdual(self.potential, self.layout, x, self.coordinates, params).grad
            return -(ginv @ grad) if ginv is not None else -grad
        env = binding(self.layout, x, params)
        return np.array([eval_env(c, env) for c in self.components])


def newton_field(g: MetricField, F: ForceField | None, q, v, params: Params = None,
                 t: float = 0.0) -> np.ndarray:
    """Acceleration F - Gamma(v, v)."""
    mj = metric_jet(g, q, params)
    v = np.asarray(v, dtype=float)
    acc = -np.einsum("kij,i,j->k", _christoffel_from(mj), v, v)
    if F is not None:
        acc = acc + F.evaluate(np.asarray(q, float), v, t, params, mj.ginv)
    return acc


@dataclass
class Curvature:
    riemann: np.ndarray   # R[l, i, j, k]
    ricci: np.ndarray     # R[j, k]
    scalar: float


def curvature(g: MetricField, q, params: Params = None) -> Curvature:
    mj = metric_jet(g, q, params)
    G = _christoffel_from(mj)
    dG = christoffel_derivative(mj)
    R = (dG.transpose(1, 0, 2, 3) - dG.transpose(1, 2, 0, 3)
         + np.einsum("mjk,lim->lijk", G, G) - np.einsum("mik,ljm->lijk", G, G))
    Ric = np.einsum("iijk->jk", R)
    return Curvature(R, Ric, float(np.einsum("jk,jk->", mj.ginv, Ric)))


def holonomic_project(g: MetricField, F, constraints: Sequence[Expr], q,
                      params: Params = None, t: float = 0.0,
                      v=None) -> tuple[np.ndarray, np.ndarray]:
    """Split a force into parts tangent and normal to {phi_a(q) = 0}.

    The normal directions grad phi_a = g^-1 d phi_a are orthonormalised in
    the metric (Gram-Schmidt) and removed from F. ``F`` is a
    :class:`ForceField` or a plain component vector. Returns
    ``(tangent_part, normal_part)``.
    """
    mj = metric_jet(g, q, params)
    q = np.asarray(q, dtype=float)
    if isinstance(F, ForceField):
        vv = np.zeros(g.n) if v is None else np.asarray(v, float)
        Fv = F.evaluate(q, vv, t, params, mj.ginv)
    else:
        Fv = np.asarray(F, dtype=float)
    layout = VarLayout(g.coordinates)
    basis: list[np.ndarray] = []
    for a, phi in enumerate(constraints):
        X = mj.ginv @ eval_hyperdual(phi, layout, q, None, params).grad
        norm0 = np.sqrt(X @ mj.g @ X)
        for e in basis:
            X = X - (e @ mj.g @ X) * e
        nrm = np.sqrt(max(X @ mj.g @ X, 0.0))
        if norm0 == 0.0 or nrm <= 1e-10 * norm0:
            raise ConstraintError(f"constraint gradients are dependent at q={q.tolist()} (index {a})")
        basis.append(X / nrm)
    normal = sum(((e @ mj.g @ Fv) * e for e in basis), np.zeros(g.n))
    return Fv - normal, normal


def nonholonomic_step(g: MetricField, F: ForceField | None, constraints: Sequence[Expr],
                      q, v, params: Params = None, t: float = 0.0,
                      tol: float = CONSTRAINT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Accelerations and multipliers for constraints linear in velocity.

    Each constraint phi_k(q, v) = a^k_j(q) v^j is an expression over
    coordinates and velocities (names from ``F`` or ``v<coord>``). The
    multipliers f solve (A g^-1 A^T) f = -(d_q phi . v) - A u with
    u = F - Gamma(v, v); the returned acceleration is u + g^-1 A^T f.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    mj = metric_jet(g, q, params)
    u = -np.einsum("kij,i,j->k", _christoffel_from(mj), v, v)
    if F is not None:
        u = u + F.evaluate(q, v, t, params, mj.ginv)
    if not constraints:
        return u, np.zeros(0)
    n = g.n
    vel = F.velocities if F is not None else tuple("v" + c for c in g.coordinates)
    layout = VarLayout(g.coordinates + vel)
    x = np.concatenate([q, v])
    A = np.empty((len(constraints), n))
    b = np.empty(len(constraints))
    for k, phi in enumerate(constraints):
        hd = eval_hyperdual(phi, layout, x, None, params)
        H = hd.hessian()
        if np.max(np.abs(H[n:, n:])) > 1e-12:
            raise ConstraintError(f"constraint {k} is not linear in the velocities")
        a = hd.grad[n:]
        if abs(hd.value - a @ v) > 1e-12 * max(1.0, abs(hd.value)):
            raise ConstraintError(f"constraint {k} has a velocity-independent term")
        if abs(hd.value) > tol:
            raise ConstraintError(f"velocity violates constraint {k}: residual {hd.value:.3e}")
        A[k] = a
        b[k] = hd.grad[:n] @ v
    M = A @ mj.ginv @ A.T
    try:
        f = solve(M, -b - A @ u)
    except SingularMatrix as exc:
        raise ConstraintError(f"constraints are rank deficient at q={q.tolist()}") from exc
    return u + mj.ginv @ A.T @ f, f


def geodesic_rhs(g: MetricField, F: ForceField | None = None, params: Params = None,
                 constraints: Sequence[Expr] = ()):
    """Right-hand side over states (q, v) for the integrator."""
    n = g.n

    def rhs(t, x):
        q, v = x[:n], x[n:]
        if constraints:
            acc = nonholonomic_step(g, F, constraints, q, v, params, t, tol=np.inf)[0]
        else:
            acc = newton_field(g, F, q, v, params, t)
        return np.concatenate([v, acc])

    return rhs


def kinetic_norm(g: MetricField, q, v, params: Params = None) -> float:
    """g(v, v)."""
    layout = VarLayout(g.coordinates)
    env = binding(layout, q, params)
    G = np.array([[eval_env(e, env) for e in r] for r in g.entries])
    v = np.asarray(v, dtype=float)
    return float(v @ G @ v)
