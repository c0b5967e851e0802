"""
Nonautonomous dynamics with time carried as a phase coordinate.

Canonical points are ``(t, q.., p..)`` and tangent points ``(t, q.., v..)``.
"""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .autodiff import eval_hyperdual
from .expr import Expr
from .phase import Chart, FieldEval, as_point, lagrangian_jet, solve_velocity_hessian

Params = Mapping[str, float] | None

MODES = ("evolution", "hamiltonian", "gradient")


def evolution_field(h: Expr, chart: Chart, x, params: Params = None,
                    mode: str = "evolution") -> FieldEval:
    """Evolution, Hamiltonian or gradient field of ``h``.

    All three share dq/dt = dh/dp and dp/dt = -dh/dq; the time component
    is 1, 0 or dh/dt respectively.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    layout = chart.cotangent(time=True)
    x = as_point(x, layout)
    g = eval_hyperdual(h, layout, x, None, params).grad
    n = chart.n
    tdot = {"evolution": 1.0, "hamiltonian": 0.0, "gradient": g[0]}[mode]
    comp = np.concatenate([[tdot], g[1 + n:], -g[1:1 + n]])
    return FieldEval(layout.names, comp, {"dh_dt": float(g[0])})


def lagrangian_reeb(L: Expr, chart: Chart, x, params: Params = None) -> FieldEval:
    """Lagrangian Reeb field d/dt + R^i d/dv^i with W R = -d2L/dt dv.

    ``extras['reeb_energy']`` holds R_L(E_L) and ``extras['dL_dt']`` the
    partial time derivative; the two agree up to sign.
    """
    layout = chart.tangent(time=True)
    x = as_point(x, layout)
    d = lagrangian_jet(L, chart, x, params, layout)
    n = chart.n
    R = solve_velocity_hessian(d.W, -d.dtv, x)
    comp = np.concatenate([[1.0], np.zeros(n), R])
    # R_L(E_L) = dE/dt + R.dE/dv, with dE/dt = v.d2L/dtdv - dL/dt and dE/dv = W v
    v = x[1 + n:]
    dE_dt = float(v @ d.dtv - d.dt)
    reeb_energy = dE_dt + float(R @ (d.W @ v))
    return FieldEval(layout.names, comp,
                     {"reeb_energy": reeb_energy, "dL_dt": d.dt, "energy": d.energy})


def nonautonomous_el_field(L: Expr, chart: Chart, x, params: Params = None) -> FieldEval:
    """Second-order field with W dv/dt = dL/dq - (d2L/dq dv) v - d2L/dv dt."""
    layout = chart.tangent(time=True)
    x = as_point(x, layout)
    d = lagrangian_jet(L, chart, x, params, layout)
    n = chart.n
    v = x[1 + n:]
    acc = solve_velocity_hessian(d.W, d.grad_q - d.cross_q @ v - d.dtv, x)
    comp = np.concatenate([[1.0], v, acc])
    return FieldEval(layout.names, comp,
                     {"energy": d.energy, "lagrangian": d.value, "dL_dt": d.dt})


def energy_rate(L: Expr, chart: Chart, x, params: Params = None) -> tuple[float, float]:
    """(dE_L/dt along the field, -dL/dt) at a tangent point; they coincide."""
    layout = chart.tangent(time=True)
    x = as_point(x, layout)
    X = nonautonomous_el_field(L, chart, x, params).components
    n = chart.n
    d = lagrangian_jet(L, chart, x, params, layout)
    v = x[1 + n:]
    # gradient of E = v.p - L in (t, q, v) order
    dE = np.concatenate([
        [v @ d.dtv - d.dt],
        d.cross_q.T @ v - d.grad_q,
        d.W @ v,
    ])
    return float(dE @ X), -d.dt
