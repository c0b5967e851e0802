"""
Unified Lagrangian-Hamiltonian (Skinner-Rusk) description on the
Whitney sum of velocities and momenta.

Points are laid out ``[t] q.. v.. p.. [s]``. The flavor selects which of
the optional slots is present: ``autonomous`` (neither), ``extended``
(time) or ``contact`` (action).
"""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .expr import Expr
from .phase import (
    Chart, FieldEval, OffConstraint, SingularLagrangian, as_point, lagrangian_jet,
    solve_velocity_hessian, split,
)

Params = Mapping[str, float] | None

FLAVORS = ("autonomous", "extended", "contact")
CONSTRAINT_TOL = 1e-9


class SecondaryConstraints(SingularLagrangian):
    """Tangency cannot be solved for every acceleration.

    The constraint algorithm would continue with secondary constraints;
    that branch is not iterated here.
    """


def _layout(chart: Chart, flavor: str):
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {FLAVORS}")
    return chart.pontryagin(time=flavor == "extended", action=flavor == "contact")


def _parts(chart: Chart, x, flavor: str):
    layout = _layout(chart, flavor)
    x = as_point(x, layout)
    sp = split(chart, layout)
    return layout, x, x[sp.v], x[sp.p]


def coupling(chart: Chart, x, flavor: str = "autonomous") -> float:
    """Natural pairing v.p."""
    _, _, v, p = _parts(chart, x, flavor)
    return float(v @ p)


def unified_hamiltonian(L: Expr, chart: Chart, x, params: Params = None,
                        flavor: str = "autonomous") -> float:
    layout, x, v, p = _parts(chart, x, flavor)
    d = lagrangian_jet(L, chart, x, params, layout)
    return float(v @ p) - d.value


def constraint_residuals(L: Expr, chart: Chart, x, params: Params = None,
                         flavor: str = "autonomous") -> np.ndarray:
    """p - dL/dv; zero exactly on the graph of the Legendre map."""
    layout, x, v, p = _parts(chart, x, flavor)
    d = lagrangian_jet(L, chart, x, params, layout)
    return p - d.p


def tangency_solve(L: Expr, chart: Chart, x, params: Params = None,
                   flavor: str = "autonomous", tol: float = CONSTRAINT_TOL) -> np.ndarray:
    """Accelerations making the unified field tangent to the constraint surface."""
    return unified_field(L, chart, x, params, flavor, tol).extras["accel"]


def unified_field(L: Expr, chart: Chart, x, params: Params = None,
                  flavor: str = "autonomous", tol: float = CONSTRAINT_TOL) -> FieldEval:
    """Full unified field at an on-constraint point.

    dq/dt = v, dv/dt = F, dp/dt = dL/dq (plus p dL/ds in the contact
    flavor), dt/dt = 1 and ds/dt = L where those slots exist.
    """
    layout, x, v, p = _parts(chart, x, flavor)
    d = lagrangian_jet(L, chart, x, params, layout)
    res = p - d.p
    worst = float(np.max(np.abs(res)))
    if worst > tol:
        raise OffConstraint(
            f"point is off the constraint surface: max |p - dL/dv| = {worst:.3e} > {tol:g}")
    rhs = d.grad_q - d.cross_q @ v
    pdot = d.grad_q.copy()
    if flavor == "extended":
        rhs = rhs - d.dtv
    elif flavor == "contact":
        rhs = rhs - d.value * d.dsv + d.ds * p
        pdot = pdot + d.ds * p
    try:
        F = solve_velocity_hessian(d.W, rhs, x)
    except SingularLagrangian as exc:
        raise SecondaryConstraints(x, exc.pivot_index) from exc
    parts = []
    if flavor == "extended":
        parts.append([1.0])
    parts += [v, F, pdot]
    if flavor == "contact":
        parts.append([d.value])
    return FieldEval(layout.names, np.concatenate(parts),
                     {"accel": F, "H": float(v @ p) - d.value},
                     {"constraint": worst})


def lift(L: Expr, chart: Chart, x_tangent, params: Params = None,
         flavor: str = "autonomous") -> np.ndarray:
    """Place a tangent point ``[t] q v [s]`` on the constraint surface."""
    tl = chart.tangent(time=flavor == "extended", action=flavor == "contact")
    x = as_point(x_tangent, tl)
    d = lagrangian_jet(L, chart, x, params, tl)
    sp = split(chart, tl)
    head = x[: (sp.v[-1] + 1)]
    tail = x[sp.v[-1] + 1:]
    return np.concatenate([head, d.p, tail])


def projection_check(L: Expr, chart: Chart, x, params: Params = None,
                     flavor: str = "autonomous", h: Expr | None = None,
                     tol: float = CONSTRAINT_TOL) -> dict[str, float]:
    """Compare the projected unified field with both classical pictures.

    ``lagrangian`` is the sup-norm difference between the tangent-side
    projection and the Euler-Lagrange (or nonautonomous / Herglotz) field.
    ``hamiltonian`` compares the cotangent-side projection with the
    Hamiltonian field of ``h`` at the Legendre image; without ``h`` the
    push-forward of the Lagrangian field is used instead.
    """
    from .symplectic import legendre_jacobian

    layout, x, v, p = _parts(chart, x, flavor)
    X = unified_field(L, chart, x, params, flavor, tol).components
    sp = split(chart, layout)
    keep_t = [sp.t] if sp.t is not None else []
    keep_s = [sp.s] if sp.s is not None else []
    tan_idx = keep_t + sp.q + sp.v + keep_s
    cot_idx = keep_t + sp.q + sp.p + keep_s
    xt = x[tan_idx]
    xc = x[cot_idx]
    if flavor == "autonomous":
        from .symplectic import euler_lagrange_field as lag, hamiltonian_field as ham
    elif flavor == "extended":
        from .cosymplectic import nonautonomous_el_field as lag, evolution_field as ham
    else:
        from .contact import herglotz_el_field as lag, contact_hamiltonian_field as ham
    XL = lag(L, chart, xt, params).components
    out = {"lagrangian": float(np.max(np.abs(X[tan_idx] - XL)))}
    if h is not None:
        Xh = ham(h, chart, xc, params).components
    else:
        tl = chart.tangent(time=flavor == "extended", action=flavor == "contact")
        d = lagrangian_jet(L, chart, xt, params, tl)
        Xh = legendre_jacobian(d, chart.n, time=flavor == "extended",
                               action=flavor == "contact") @ XL
    out["hamiltonian"] = float(np.max(np.abs(X[cot_idx] - Xh)))
    return out
