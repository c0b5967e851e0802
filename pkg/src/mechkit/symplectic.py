"""
Autonomous conservative dynamics in natural and canonical coordinates.

Hamiltonian side points are ``(q.., p..)``; Lagrangian side points are
``(q.., v..)``. The Euler-Lagrange field uses the second-order form in
which the acceleration multiplies d/dv (the printed d/dq index on that
term is a misprint).
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .autodiff import eval_hyperdual, jet, solve
from .expr import Expr, VarLayout, evaluate
from .integrate import IntegratorConfig, integrate
from .phase import (
    Chart, FieldEval, LagrangianData, as_point, lagrangian_jet,
    solve_velocity_hessian,
)

Params = Mapping[str, float] | None


def canonical_matrix(n: int) -> np.ndarray:
    """Omega_0 in (q, p) ordering: [[0, I], [-I, 0]]."""
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, I], [-I, Z]])


def hamiltonian_field(h: Expr, chart: Chart, x, params: Params = None) -> FieldEval:
    """Hamilton equations: dq/dt = dh/dp, dp/dt = -dh/dq."""
    layout = chart.cotangent()
    x = as_point(x, layout)
    hd = eval_hyperdual(h, layout, x, None, params)
    n = chart.n
    comp = np.concatenate([hd.grad[n:], -hd.grad[:n]])
    return FieldEval(layout.names, comp, {"h": hd.value})


def poisson_bracket(f: Expr, g: Expr, chart: Chart, x, params: Params = None) -> float:
    """Canonical coordinate bracket sum_i (df/dq^i dg/dp_i - df/dp_i dg/dq^i)."""
    layout = chart.cotangent()
    x = as_point(x, layout)
    n = chart.n
    df, dg = (d.grad for d in jet([f, g], layout, x, None, params))
    return float(df[:n] @ dg[n:] - df[n:] @ dg[:n])


def lagrangian_data(L: Expr, chart: Chart, x, params: Params = None) -> LagrangianData:
    layout = chart.tangent()
    return lagrangian_jet(L, chart, as_point(x, layout), params, layout)


def euler_lagrange_field(L: Expr, chart: Chart, x, params: Params = None) -> FieldEval:
    layout = chart.tangent()
    x = as_point(x, layout)
    d = lagrangian_jet(L, chart, x, params, layout)
    v = x[chart.n:]
    acc = solve_velocity_hessian(d.W, d.grad_q - d.cross_q @ v, x)
    return FieldEval(layout.names, np.concatenate([v, acc]),
                     {"energy": d.energy, "lagrangian": d.value})


def legendre_map(L: Expr, chart: Chart, x, params: Params = None) -> np.ndarray:
    """Fibre derivative: (q, v) -> (q, dL/dv)."""
    layout = chart.tangent()
    x = as_point(x, layout)
    d = lagrangian_jet(L, chart, x, params, layout)
    return np.concatenate([x[: chart.n], d.p])


def legendre_jacobian(d: LagrangianData, n: int, *, time: bool = False,
                      action: bool = False) -> np.ndarray:
    """Derivative of ([t], q, v, [s]) -> ([t], q, dL/dv, [s])."""
    off = 1 if time else 0
    dim = 2 * n + off + (1 if action else 0)
    J = np.eye(dim)
    rows = slice(off + n, off + 2 * n)
    J[rows, off:off + n] = d.cross_q
    J[rows, off + n:off + 2 * n] = d.W
    if time:
        J[rows, 0] = d.dtv
    if action:
        J[rows, dim - 1] = d.dsv
    return J


def equivalence_residual(L: Expr, h: Expr, chart: Chart, x, params: Params = None,
                         formalism: str = "symplectic") -> float:
    """Sup-norm of D(FL) X_L - X_h(FL(x)).

    ``formalism`` selects the autonomous, nonautonomous (``cosymplectic``)
    or dissipative (``contact``) pair of fields; points then carry a
    leading time or trailing action slot.
    """
    time = formalism == "cosymplectic"
    action = formalism == "contact"
    if formalism not in ("symplectic", "cosymplectic", "contact"):
        raise ValueError(f"unknown formalism {formalism!r}")
    tl = chart.tangent(time, action)
    x = as_point(x, tl)
    d = lagrangian_jet(L, chart, x, params, tl)
    if formalism == "symplectic":
        XL = euler_lagrange_field(L, chart, x, params).components
    elif time:
        from .cosymplectic import nonautonomous_el_field
        XL = nonautonomous_el_field(L, chart, x, params).components
    else:
        from .contact import herglotz_el_field
        XL = herglotz_el_field(L, chart, x, params).components
    pushed = legendre_jacobian(d, chart.n, time=time, action=action) @ XL
    n = chart.n
    off = 1 if time else 0
    y = x.copy()
    y[off + n: off + 2 * n] = d.p
    if formalism == "symplectic":
        Xh = hamiltonian_field(h, chart, y, params).components
    elif time:
        from .cosymplectic import evolution_field
        Xh = evolution_field(h, chart, y, params).components
    else:
        from .contact import contact_hamiltonian_field
        Xh = contact_hamiltonian_field(h, chart, y, params).components
    return float(np.max(np.abs(pushed - Xh)))


def hj_residual(h: Expr, S: Expr | Sequence[Expr], chart: Chart, samples,
                params: Params = None) -> tuple[float, np.ndarray]:
    """Check the Hamilton-Jacobi condition h(q, dS/dq) = const on samples.

    ``S`` is a generating function over the coordinates, or directly the
    list of its partial derivatives (useful when S itself has no closed
    form in the expression grammar). Returns the largest deviation of
    h(q, dS/dq) from its sample mean and the base field dh/dp at every
    sample.
    """
    ql = VarLayout(chart.coordinates)
    cl = chart.cotangent()
    n = chart.n
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[1] != n:
        samples = samples.reshape(-1, n)
    vals, fields = [], []
    for q in samples:
        if isinstance(S, Expr):
            p = eval_hyperdual(S, ql, q, None, params).grad
        else:
            if len(S) != n:
                raise ValueError(f"expected {n} momentum expressions, got {len(S)}")
            p = np.array([evaluate(c, ql, q, params) for c in S])
        hd = eval_hyperdual(h, cl, np.concatenate([q, p]), chart.momenta, params)
        vals.append(hd.value)
        fields.append(hd.grad)
    vals = np.array(vals)
    return float(np.max(np.abs(vals - vals.mean()))), np.array(fields)


def hamiltonian_rhs(h: Expr, chart: Chart, params: Params = None):
    layout = chart.cotangent()
    n = chart.n

    def rhs(t, x):
        g = eval_hyperdual(h, layout, x, None, params).grad
        return np.concatenate([g[n:], -g[:n]])

    return rhs


def lagrangian_rhs(L: Expr, chart: Chart, params: Params = None):
    def rhs(t, x):
        return euler_lagrange_field(L, chart, x, params).components

    return rhs


def flow_jacobian(rhs, x0, T: float, config: IntegratorConfig, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian of the time-T flow."""
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    if T == 0:
        return np.eye(d)
    J = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        xp = integrate(rhs, x0 + e, (0.0, T), config).states[-1]
        xm = integrate(rhs, x0 - e, (0.0, T), config).states[-1]
        J[:, j] = (xp - xm) / (2 * step)
    return J


def flow_symplecticity(chart: Chart, x, T: float, *, h: Expr | None = None,
                       L: Expr | None = None, params: Params = None,
                       config: IntegratorConfig | None = None,
                       fd_step: float = 1e-5) -> float:
    """Deviation ||J^T Omega_0 J - Omega_0||_inf of the time-T flow.

    With a Hamiltonian, ``x`` is a canonical point and J the flow Jacobian.
    With a Lagrangian, ``x`` is a tangent point and the Lagrangian flow is
    conjugated by the Legendre map before the canonical test.
    """
    if (h is None) == (L is None):
        raise ValueError("give exactly one of h or L")
    cfg = config or IntegratorConfig(rtol=1e-12, atol=1e-12)
    n = chart.n
    Om = canonical_matrix(n)
    if h is not None:
        x = as_point(x, chart.cotangent())
        J = flow_jacobian(hamiltonian_rhs(h, chart, params), x, T, cfg, fd_step)
    else:
        x = as_point(x, chart.tangent())
        rhs = lagrangian_rhs(L, chart, params)
        JL = flow_jacobian(rhs, x, T, cfg, fd_step)
        xT = integrate(rhs, x, (0.0, T), cfg).states[-1] if T else x
        D0 = legendre_jacobian(lagrangian_data(L, chart, x, params), n)
        DT = legendre_jacobian(lagrangian_data(L, chart, xT, params), n)
        J = DT @ JL @ solve(D0, np.eye(2 * n))
    return float(np.max(np.abs(J.T @ Om @ J - Om)))
