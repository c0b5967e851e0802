"""
Dissipative (action-dependent) dynamics.

Canonical points are ``(q.., p.., s)`` and tangent points ``(q.., v.., s)``,
with contact form eta = ds - p dq in both pictures (on the Lagrangian side
p stands for dL/dv).
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .autodiff import eval_hyperdual
from .expr import Expr, evaluate
from .phase import Chart, FieldEval, as_point, lagrangian_jet, solve_velocity_hessian

Params = Mapping[str, float] | None

MODES = ("hamiltonian", "gradient", "evolution")
ZERO_GUARD = 1e-9


def contact_hamiltonian_field(h: Expr, chart: Chart, x, params: Params = None,
                              mode: str = "hamiltonian") -> FieldEval:
    """Contact Hamiltonian, gradient or evolution field of ``h``.

    dq/dt = dh/dp and dp/dt = -(dh/dq + p dh/ds) in every mode; ds/dt is
    p.dh/dp - h, p.dh/dp + dh/ds or p.dh/dp.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    layout = chart.cotangent(action=True)
    x = as_point(x, layout)
    hd = eval_hyperdual(h, layout, x, None, params)
    n = chart.n
    g = hd.grad
    p = x[n:2 * n]
    hq, hp, hs = g[:n], g[n:2 * n], g[2 * n]
    ph = float(p @ hp)
    sdot = {"hamiltonian": ph - hd.value, "gradient": ph + hs, "evolution": ph}[mode]
    comp = np.concatenate([hp, -(hq + p * hs), [sdot]])
    return FieldEval(layout.names, comp, {"h": hd.value, "reeb_h": float(hs)})


def contact_reeb_lagrangian(L: Expr, chart: Chart, x, params: Params = None) -> FieldEval:
    """Lagrangian Reeb field d/ds + R^i d/dv^i with W R = -d2L/ds dv.

    ``extras['reeb_energy']`` holds R_L(E_L), equal to -dL/ds.
    """
    layout = chart.tangent(action=True)
    x = as_point(x, layout)
    d = lagrangian_jet(L, chart, x, params, layout)
    n = chart.n
    R = solve_velocity_hessian(d.W, -d.dsv, x)
    comp = np.concatenate([np.zeros(n), R, [1.0]])
    v = x[n:2 * n]
    reeb_energy = float(v @ d.dsv - d.ds) + float(R @ (d.W @ v))
    return FieldEval(layout.names, comp,
                     {"reeb_energy": reeb_energy, "dL_ds": d.ds, "energy": d.energy})


def herglotz_el_field(L: Expr, chart: Chart, x, params: Params = None) -> FieldEval:
    """Herglotz-Euler-Lagrange field: dq/dt = v, ds/dt = L and
    W dv/dt = dL/dq - (d2L/dq dv) v - L d2L/ds dv + (dL/ds) dL/dv.
    """
    layout = chart.tangent(action=True)
    x = as_point(x, layout)
    d = lagrangian_jet(L, chart, x, params, layout)
    n = chart.n
    v = x[n:2 * n]
    rhs = d.grad_q - d.cross_q @ v - d.value * d.dsv + d.ds * d.p
    acc = solve_velocity_hessian(d.W, rhs, x)
    comp = np.concatenate([v, acc, [d.value]])
    return FieldEval(layout.names, comp,
                     {"energy": d.energy, "lagrangian": d.value, "dL_ds": d.ds})


def dissipation_rate_check(chart: Chart, x, *, h: Expr | None = None, L: Expr | None = None,
                           params: Params = None) -> float:
    """Residual |<dE, X> + R(E) E| of the energy dissipation law.

    On the Hamiltonian side E = h, X = X_h and R(h) = dh/ds. On the
    Lagrangian side E = E_L, X the Herglotz field and R the Lagrangian Reeb
    field.
    """
    if (h is None) == (L is None):
        raise ValueError("give exactly one of h or L")
    n = chart.n
    if h is not None:
        layout = chart.cotangent(action=True)
        x = as_point(x, layout)
        hd = eval_hyperdual(h, layout, x, None, params)
        X = contact_hamiltonian_field(h, chart, x, params).components
        return abs(float(hd.grad @ X) + hd.grad[2 * n] * hd.value)
    layout = chart.tangent(action=True)
    x = as_point(x, layout)
    d = lagrangian_jet(L, chart, x, params, layout)
    v = x[n:2 * n]
    dE = np.concatenate([d.cross_q.T @ v - d.grad_q, d.W @ v, [v @ d.dsv - d.ds]])
    X = herglotz_el_field(L, chart, x, params).components
    RE = contact_reeb_lagrangian(L, chart, x, params).extras["reeb_energy"]
    return abs(float(dE @ X) + RE * d.energy)


def dissipated_quantity(Y: Sequence[Expr | float], chart: Chart, x, params: Params = None,
                        L: Expr | None = None) -> float:
    """F = -i(Y) eta = -(Y^s - p.Y^q).

    ``Y`` lists the components over the point layout (canonical, or tangent
    when ``L`` is given, in which case p = dL/dv). Components may be
    expressions or plain numbers.
    """
    n = chart.n
    layout = chart.tangent(action=True) if L is not None else chart.cotangent(action=True)
    x = as_point(x, layout)
    if len(Y) != len(layout):
        raise ValueError(f"generator has {len(Y)} components, expected {len(layout)}")
    y = np.array([evaluate(c, layout, x, params) if isinstance(c, Expr) else float(c) for c in Y])
    if L is not None:
        p = lagrangian_jet(L, chart, x, params, layout).p
    else:
        p = x[n:2 * n]
    return -(y[2 * n] - float(p @ y[:n]))


def conserved_quotient(F1: np.ndarray, F2: np.ndarray, zero_guard: float = ZERO_GUARD) -> dict:
    """Drift statistics of the quotient F1/F2 sampled along a trajectory."""
    F1 = np.asarray(F1, dtype=float)
    F2 = np.asarray(F2, dtype=float)
    bad = np.flatnonzero(np.abs(F2) < zero_guard)
    if bad.size:
        raise ZeroDivisionError(
            f"denominator within {zero_guard:g} of zero at sample {int(bad[0])}")
    qt = F1 / F2
    dev = np.abs(qt - qt[0])
    return {"initial": float(qt[0]), "max_drift": float(dev.max()),
            "final": float(qt[-1]), "samples": int(qt.size)}
