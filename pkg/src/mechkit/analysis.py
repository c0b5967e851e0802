"""
System-level driver: vector fields and trajectories for a :class:`SystemSpec`,
and the battery of structural checks behind ``mechkit check``.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import contact, cosymplectic, riemann, symplectic, unified
from .expr import Expr, binding, eval_env, parse
from .integrate import IntegratorConfig, Monitor, Trajectory, integrate
from .symmetry import GeneratorField, monitor, noether_check
from .system import Quantity, SystemError, SystemSpec

log = logging.getLogger(__name__)

POINTWISE_TOL = 1e-10
CONSTRAINT_DRIFT_TOL = 1e-6


def field_function(spec: SystemSpec, side: str) -> Callable[[np.ndarray], np.ndarray]:
    """x -> field components for the system on ``side``."""
    fam, ch, P = spec.family, spec.chart, spec.params
    if fam == "riemann":
        rhs = riemann.geodesic_rhs(spec.metric_field, spec.force_field, P, spec.constraint_exprs)
        return lambda x: rhs(0.0, x)
    if side == "unified":
        if spec.L is None:
            raise SystemError(f"{spec.id}: the unified description needs a lagrangian")
        return lambda x: unified.unified_field(spec.L, ch, x, P, spec.flavor, tol=np.inf).components
    if side == "tangent":
        if spec.L is None:
            raise SystemError(f"{spec.id}: no lagrangian")
        f = {"symplectic": symplectic.euler_lagrange_field,
             "cosymplectic": cosymplectic.nonautonomous_el_field,
             "contact": contact.herglotz_el_field}[fam]
        return lambda x: f(spec.L, ch, x, P).components
    if side == "cotangent":
        if spec.h is None:
            raise SystemError(f"{spec.id}: no hamiltonian")
        f = {"symplectic": symplectic.hamiltonian_field,
             "cosymplectic": cosymplectic.evolution_field,
             "contact": contact.contact_hamiltonian_field}[fam]
        return lambda x: f(spec.h, ch, x, P).components
    raise SystemError(f"unknown side {side!r}")


def rhs_function(spec: SystemSpec, side: str):
    if spec.family == "riemann":
        return riemann.geodesic_rhs(spec.metric_field, spec.force_field, spec.params,
                                    spec.constraint_exprs)
    # a time slot, when present, is integrated like any other coordinate
    f = field_function(spec, side)
    return lambda t, x: f(x)


def state_names(spec: SystemSpec, side: str) -> tuple[str, ...]:
    return spec.layout(side).names


def quantity_monitor(spec: SystemSpec, q: Quantity, side: str) -> Monitor | None:
    """Monitor for ``q`` if every variable it uses is in the state (or is t)."""
    from .expr import free_identifiers

    e = spec.quantity_expr(q)
    names = state_names(spec, side)
    need = free_identifiers(e) - set(spec.params)
    if not need <= set(names) | {"t"}:
        return None
    params = dict(spec.params)

    def fn(t, x, e=e):
        env = binding(names, x, params)
        env.setdefault("t", t)
        return eval_env(e, env)

    return Monitor(q.name, fn)


def constraint_monitor(spec: SystemSpec) -> Monitor:
    def fn(t, x):
        r = unified.constraint_residuals(spec.L, spec.chart, x, spec.params, spec.flavor)
        return float(np.max(np.abs(r)))

    return Monitor("constraint", fn)


def simulate(spec: SystemSpec, side: str | None = None, t_span=None,
             config: IntegratorConfig | None = None, sample_times=None,
             overrides: Mapping[str, float] | None = None) -> Trajectory:
    side = side or spec.default_side()
    t_span = tuple(t_span or spec.t_span)
    x0 = spec.initial_state(side, overrides)
    if spec.has_time:
        x0[0] = t_span[0]
    mons = [m for m in (quantity_monitor(spec, q, side) for q in spec.quantities) if m is not None]
    if side == "unified":
        mons.append(constraint_monitor(spec))
    return integrate(rhs_function(spec, side), x0, t_span, config,
                     sample_times=sample_times, names=state_names(spec, side),
                     monitors=mons, system_id=spec.id)


def fitted_rate(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares rate of f = f0 exp(-rate t)."""
    return float(-np.polyfit(times, np.log(np.abs(values)), 1)[0])


def _rate_series(spec: SystemSpec, q: Quantity, traj: Trajectory) -> np.ndarray:
    r = spec.rate_value(q)
    if isinstance(r, Expr):
        env_names = traj.names
        out = []
        for t, x in zip(traj.times, traj.states):
            env = binding(env_names, x, spec.params)
            env.setdefault("t", t)
            out.append(eval_env(r, env))
        return np.array(out)
    return np.full(len(traj), float(r))


def quantity_summary(spec: SystemSpec, q: Quantity, traj: Trajectory) -> dict | None:
    if q.name not in traj.monitors:
        return None
    f = traj.monitors[q.name]
    out = {"quantity": q.name, "behavior": q.behavior, "initial": float(f[0]),
           "final": float(f[-1])}
    if q.behavior == "conserved":
        dev = np.abs(f - f[0])
        out["max_drift"] = float(dev.max())
        if q.relative:
            out["max_drift"] = float((dev / max(abs(f[0]), 1e-300)).max())
    elif q.behavior == "decay":
        rates = _rate_series(spec, q, traj)
        rep = monitor(traj, lambda t, x, _f=iter(f): next(_f), "decay",
                      lambda t, x, _r=iter(rates): next(_r))
        out["max_deviation"] = rep.max_rel if q.relative else rep.max_abs
        out["fitted_rate"] = fitted_rate(traj.times, f)
        out["expected_rate"] = float(np.mean(rates))
    if q.behavior in ("conserved", "decay"):
        val = out.get("max_drift", out.get("max_deviation"))
        out["tolerance"] = q.tol
        out["passed"] = bool(val <= q.tol)
    return out


# ----------------------------------------------------------------------------
# check battery


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _le(name, value, tol, **detail) -> CheckResult:
    return CheckResult(name, float(value), tol, bool(value <= tol), detail)


def sample_points(spec: SystemSpec, side: str, k: int, seed: int = 0) -> np.ndarray:
    """``k`` points scattered around the initial state (deterministic)."""
    rng = np.random.default_rng(seed)
    x0 = spec.initial_state(side)
    pts = x0 + spec.sample_radius * rng.uniform(-1.0, 1.0, size=(k, len(x0)))
    if side == "unified":
        tl = spec.layout("tangent")
        lay = spec.layout(side)
        idx = [lay.index[n] for n in tl.names]
        pts = np.array([unified.lift(spec.L, spec.chart, p[idx], spec.params, spec.flavor)
                        for p in pts])
    return pts


def mechanical_lagrangian(spec: SystemSpec) -> Expr:
    """1/2 g_ij v^i v^j - V as an expression over (q, v)."""
    vel = spec.chart.velocities
    terms = [f"({spec.metric[i][j]})*{vel[i]}*{vel[j]}"
             for i in range(spec.n) for j in range(spec.n) if spec.metric[i][j].strip() != "0"]
    text = "0.5*(" + " + ".join(terms or ["0"]) + ")"
    if spec.potential is not None:
        text += f" - ({spec.potential})"
    return parse(text, spec.chart.tangent().names)


def _equivalence_checks(spec: SystemSpec, pts_t: np.ndarray) -> list[CheckResult]:
    out = []
    fam, ch, P = spec.family, spec.chart, spec.params
    if spec.L is not None and spec.h is not None:
        res = max(symplectic.equivalence_residual(spec.L, spec.h, ch, x, P, fam) for x in pts_t)
        out.append(_le("legendre_equivalence", res, POINTWISE_TOL, samples=len(pts_t)))
    if spec.L is not None:
        pts_u = np.array([unified.lift(spec.L, ch, x, P, spec.flavor) for x in pts_t])
        lag = ham = 0.0
        acc = 0.0
        lag_field = field_function(spec, "tangent")
        n = spec.n
        off = 1 if spec.has_time else 0
        for xu, xt in zip(pts_u, pts_t):
            r = unified.projection_check(spec.L, ch, xu, P, spec.flavor, spec.h)
            lag, ham = max(lag, r["lagrangian"]), max(ham, r["hamiltonian"])
            F = unified.tangency_solve(spec.L, ch, xu, P, spec.flavor)
            acc = max(acc, float(np.max(np.abs(F - lag_field(xt)[off + n: off + 2 * n]))))
        out.append(_le("unified_tangency_accel", acc, POINTWISE_TOL))
        out.append(_le("unified_projection_lagrangian", lag, POINTWISE_TOL))
        out.append(_le("unified_projection_hamiltonian", ham, POINTWISE_TOL))
    return out


def _formalism_checks(spec: SystemSpec, pts_t, pts_c) -> list[CheckResult]:
    out = []
    ch, P = spec.chart, spec.params
    if spec.family == "cosymplectic" and spec.L is not None:
        reeb = energy = 0.0
        for x in pts_t:
            R = cosymplectic.lagrangian_reeb(spec.L, ch, x, P).extras
            reeb = max(reeb, abs(R["reeb_energy"] + R["dL_dt"]))
            a, b = cosymplectic.energy_rate(spec.L, ch, x, P)
            energy = max(energy, abs(a - b))
        out.append(_le("reeb_energy_identity", reeb, POINTWISE_TOL))
        out.append(_le("energy_rate_law", energy, POINTWISE_TOL))
    if spec.family == "contact":
        if spec.h is not None:
            r = max(contact.dissipation_rate_check(ch, x, h=spec.h, params=P) for x in pts_c)
            out.append(_le("dissipation_rate_hamiltonian", r, POINTWISE_TOL))
        if spec.L is not None:
            r = max(contact.dissipation_rate_check(ch, x, L=spec.L, params=P) for x in pts_t)
            out.append(_le("dissipation_rate_lagrangian", r, POINTWISE_TOL))
            reeb = 0.0
            for x in pts_t:
                R = contact.contact_reeb_lagrangian(spec.L, ch, x, P).extras
                reeb = max(reeb, abs(R["reeb_energy"] + R["dL_ds"]))
            out.append(_le("reeb_energy_identity", reeb, POINTWISE_TOL))
    return out


def _symmetry_checks(spec: SystemSpec, pts_t) -> list[CheckResult]:
    out = []
    if spec.L is None:
        return out
    lay = spec.layout("tangent")
    for s in spec.symmetries:
        lift = "tangent" if len(s.components) == spec.n else "none"
        Y = GeneratorField.parse(spec.chart, lay, s.components, lift, spec.params)
        rep = noether_check(Y, spec.L, spec.chart, pts_t, spec.params, spec.family)
        worst = max(rep.form_residual, rep.energy_residual, rep.time_component_residual)
        if s.noether:
            out.append(_le(f"noether[{s.name}]", worst, POINTWISE_TOL,
                           form=rep.form_residual, energy=rep.energy_residual))
            if s.f is not None:
                fe = spec.quantity_expr(Quantity("f", s.f))
                ref = np.array([eval_env(fe, binding(lay, x, spec.params)) for x in pts_t])
                out.append(_le(f"noether_function[{s.name}]",
                               float(np.max(np.abs(rep.f_values - ref))), POINTWISE_TOL))
        else:
            # declared not to be a Noether symmetry: expect a clearly nonzero residual
            out.append(CheckResult(f"not_noether[{s.name}]", worst, 1e-6, bool(worst > 1e-6),
                                   {"form": rep.form_residual, "energy": rep.energy_residual}))
    return out


def _riemann_checks(spec: SystemSpec, pts) -> list[CheckResult]:
    out = []
    g, F, P = spec.metric_field, spec.force_field, spec.params
    n = spec.n
    if not spec.constraints and (spec.force is None):
        L = mechanical_lagrangian(spec)
        res = 0.0
        for x in pts:
            a = symplectic.euler_lagrange_field(L, spec.chart, x, P).components[n:]
            b = riemann.newton_field(g, F, x[:n], x[n:], P)
            res = max(res, float(np.max(np.abs(a - b))))
        out.append(_le("mechanical_lagrangian_vs_newton", res, POINTWISE_TOL))
    sym = 0.0
    for x in pts:
        G = riemann.christoffel(g, x[:n], P)
        sym = max(sym, float(np.max(np.abs(G - G.transpose(0, 2, 1)))))
    out.append(_le("christoffel_symmetry", sym, 1e-12))
    return out


def run_checks(spec: SystemSpec, samples: int = 20, seed: int = 0,
               config: IntegratorConfig | None = None, unified_run: bool = True) -> list[CheckResult]:
    """Full invariant battery for one system."""
    results: list[CheckResult] = []
    if spec.family == "riemann":
        pts = sample_points(spec, "tangent", samples, seed)
        results += _riemann_checks(spec, pts)
    else:
        pts_t = sample_points(spec, "tangent", samples, seed) if spec.L is not None else []
        pts_c = (sample_points(spec, "cotangent", samples, seed) if spec.h is not None else [])
        results += _equivalence_checks(spec, pts_t)
        results += _formalism_checks(spec, pts_t, pts_c)
        results += _symmetry_checks(spec, pts_t)
    traj = simulate(spec, config=config)
    for q in spec.quantities:
        summ = quantity_summary(spec, q, traj)
        if summ is not None and "passed" in summ:
            val = summ.get("max_drift", summ.get("max_deviation"))
            results.append(CheckResult(f"monitor[{q.name}]", val, q.tol, summ["passed"], summ))
    if unified_run and spec.family != "riemann" and spec.L is not None:
        ut = simulate(spec, "unified", config=config)
        drift = float(np.max(ut.monitors["constraint"]))
        results.append(_le("unified_constraint_drift", drift, CONSTRAINT_DRIFT_TOL))
    for r in results:
        log.info("%s %s: %.3e (tol %.1e) %s", spec.id, r.name, r.value, r.tolerance,
                 "pass" if r.passed else "FAIL")
    return results
