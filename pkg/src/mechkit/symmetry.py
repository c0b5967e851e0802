"""
Sampled verification of symmetries and conserved or dissipated quantities.

Every field here exposes ``value_and_jacobian(x) -> (Y, dY)`` over a
fixed phase layout, so generators and the dynamics themselves can be fed
to :func:`lie_bracket` interchangeably.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .autodiff import eval_hyperdual, jet
from .expr import Expr, VarLayout, parse
from .integrate import Trajectory
from .phase import Chart, as_point, split

Params = Mapping[str, float] | None

LIFTS = ("none", "tangent", "cotangent", "hamiltonian")
FD_STEP = 1e-5


def _phase_layout(chart: Chart, side: str, formalism: str) -> VarLayout:
    time = formalism == "cosymplectic"
    action = formalism == "contact"
    if side == "tangent":
        return chart.tangent(time, action)
    if side == "cotangent":
        return chart.cotangent(time, action)
    raise ValueError(f"unknown side {side!r}")


@dataclass(frozen=True)
class GeneratorField:
    """Vector field on a phase layout given by expressions.

    ``lift`` selects how ``components`` are read:

    * ``none``: one expression per layout slot;
    * ``tangent``: a configuration field Z(q[, t]) lifted to (Z, (dZ) v);
    * ``cotangent``: Z lifted to (Z, -p_j dZ^j/dq^i);
    * ``hamiltonian``: a single function f, giving (df/dp, -df/dq) on the
      canonical slots.
    """

    chart: Chart
    layout: VarLayout
    components: tuple[Expr, ...]
    lift: str = "none"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.lift not in LIFTS:
            raise ValueError(f"unknown lift {self.lift!r}")
        expect = {"none": len(self.layout), "tangent": self.chart.n,
                  "cotangent": self.chart.n, "hamiltonian": 1}[self.lift]
        if len(self.components) != expect:
            raise ValueError(f"{self.lift} generator needs {expect} components, "
                             f"got {len(self.components)}")

    @classmethod
    def parse(cls, chart: Chart, layout: VarLayout, components: Sequence[str | float],
              lift: str = "none", params: Params = None) -> "GeneratorField":
        names = layout.names
        comps = tuple(parse(str(c), names) for c in components)
        return cls(chart, layout, comps, lift, dict(params or {}))

    def value_and_jacobian(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = as_point(x, self.layout)
        d = len(self.layout)
        hds = jet(self.components, self.layout, x, None, self.params)
        if self.lift == "none":
            return (np.array([h.value for h in hds]), np.array([h.grad for h in hds]))
        sp = split(self.chart, self.layout)
        Y = np.zeros(d)
        J = np.zeros((d, d))
        if self.lift == "hamiltonian":
            g, H = hds[0].grad, hds[0].hessian()
            Y[sp.q], Y[sp.p] = g[sp.p], -g[sp.q]
            J[sp.q], J[sp.p] = H[sp.p], -H[sp.q]
            return Y, J
        Z = np.array([h.value for h in hds])
        dZ = np.array([h.grad for h in hds])            # dZ[i, a]
        d2Z = np.array([h.hessian() for h in hds])      # d2Z[i, a, b]
        Y[sp.q] = Z
        J[sp.q] = dZ
        if self.lift == "tangent":
            v = x[sp.v]
            Y[sp.v] = dZ[:, sp.q] @ v
            J[sp.v] = np.einsum("ija,j->ia", d2Z[:, sp.q, :], v)
            J[np.ix_(sp.v, sp.v)] += dZ[:, sp.q]
        else:
            p = x[sp.p]
            Dq = dZ[:, sp.q]                           # Dq[j, i] = dZ^j/dq^i
            Y[sp.p] = -Dq.T @ p
            J[sp.p] = -np.einsum("j,jia->ia", p, d2Z[:, sp.q, :])
            J[np.ix_(sp.p, sp.p)] -= Dq.T
        return Y, J


@dataclass(frozen=True)
class Dynamics:
    """Dynamical field of a system, with its Jacobian.

    Hamiltonian-side Jacobians come from the exact AD Hessian of h;
    Lagrangian-side ones use central differences of the field.
    """

    chart: Chart
    expr: Expr
    side: str = "cotangent"
    formalism: str = "symplectic"
    params: Mapping[str, float] = field(default_factory=dict)
    fd_step: float = FD_STEP

    @property
    def layout(self) -> VarLayout:
        return _phase_layout(self.chart, self.side, self.formalism)

    def field(self, x) -> np.ndarray:
        from . import contact, cosymplectic, symplectic

        f = {
            ("cotangent", "symplectic"): symplectic.hamiltonian_field,
            ("tangent", "symplectic"): symplectic.euler_lagrange_field,
            ("cotangent", "cosymplectic"): cosymplectic.evolution_field,
            ("tangent", "cosymplectic"): cosymplectic.nonautonomous_el_field,
            ("cotangent", "contact"): contact.contact_hamiltonian_field,
            ("tangent", "contact"): contact.herglotz_el_field,
        }[(self.side, self.formalism)]
        return f(self.expr, self.chart, x, self.params).components

    def value_and_jacobian(self, x) -> tuple[np.ndarray, np.ndarray]:
        layout = self.layout
        x = as_point(x, layout)
        if self.side == "tangent":
            X = self.field(x)
            d = len(x)
            J = np.empty((d, d))
            for j in range(d):
                e = np.zeros(d)
                e[j] = self.fd_step
                J[:, j] = (self.field(x + e) - self.field(x - e)) / (2 * self.fd_step)
            return X, J
        hd = eval_hyperdual(self.expr, layout, x, None, self.params)
        g, H = hd.grad, hd.hessian()
        sp = split(self.chart, layout)
        d = len(x)
        X = np.zeros(d)
        J = np.zeros((d, d))
        X[sp.q], J[sp.q] = g[sp.p], H[sp.p]
        X[sp.p], J[sp.p] = -g[sp.q], -H[sp.q]
        if self.formalism == "cosymplectic":
            X[sp.t] = 1.0
        elif self.formalism == "contact":
            s = sp.s
            p = x[sp.p]
            X[sp.p] -= p * g[s]
            J[sp.p] -= np.outer(p, H[s])
            J[sp.p, sp.p] -= g[s]
            X[s] = p @ g[sp.p] - hd.value
            J[s] = p @ H[sp.p] - g
            J[s, sp.p] += g[sp.p]
        return X, J


def lie_bracket(X, Y, x) -> np.ndarray:
    """[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i."""
    xv, xJ = X.value_and_jacobian(x)
    yv, yJ = Y.value_and_jacobian(x)
    return yJ @ xv - xJ @ yv


@dataclass
class SymmetryReport:
    residual: float
    samples: np.ndarray
    per_sample: np.ndarray
    conformal_factor: float | None = None


def dynamical_symmetry_residual(Y, dyn: Dynamics, samples) -> SymmetryReport:
    """max over samples of ||[Y, X_dyn]||_inf.

    If every nonzero bracket is parallel to X_dyn with a common factor, the
    factor is reported (a conformal rather than strict symmetry).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    norms, ratios = [], []
    for x in samples:
        b = lie_bracket(Y, dyn, x)
        norms.append(float(np.max(np.abs(b))))
        X = dyn.value_and_jacobian(x)[0]
        c = float(b @ X / (X @ X)) if X @ X > 0 else 0.0
        ratios.append(c if np.max(np.abs(b - c * X)) <= 1e-9 * max(1.0, norms[-1]) else np.nan)
    norms = np.array(norms)
    conf = None
    r = np.array(ratios)
    if norms.max() > 1e-9 and np.all(np.isfinite(r)) and np.ptp(r) <= 1e-9:
        conf = float(r[0])
    return SymmetryReport(float(norms.max()), samples, norms, conf)


@dataclass
class NoetherReport:
    form_residual: float
    energy_residual: float
    f_values: np.ndarray
    samples: np.ndarray
    time_component_residual: float = 0.0


def noether_check(Y, L: Expr, chart: Chart, samples, params: Params = None,
                  formalism: str = "symplectic") -> NoetherReport:
    """Check L_Y theta = 0 and L_Y E_L = 0 on samples and evaluate f_Y.

    theta is the Lagrangian 1-form: (dL/dv) dq, minus E_L dt in the
    nonautonomous case; for contact systems the contact form
    eta_L = ds - (dL/dv) dq is used and f_Y = -i(Y) eta_L. In the
    nonautonomous case Y^t must also be constant.
    """
    layout = _phase_layout(chart, "tangent", formalism)
    sp = split(chart, layout)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    d = len(layout)
    form_res, en_res, fvals, tres = [], [], [], []
    for x in samples:
        x = as_point(x, layout)
        hd = eval_hyperdual(L, layout, x, None, params)
        g, H = hd.grad, hd.hessian()
        v = x[sp.v]
        E = float(v @ g[sp.v] - hd.value)
        dE = H[sp.v].T @ v - g
        dE[sp.v] += g[sp.v]
        theta = np.zeros(d)
        dtheta = np.zeros((d, d))          # dtheta[i, j] = d_j theta_i
        sign = -1.0 if formalism == "contact" else 1.0
        theta[sp.q] = sign * g[sp.v]
        dtheta[sp.q] = sign * H[sp.v]
        if formalism == "cosymplectic":
            theta[sp.t] = -E
            dtheta[sp.t] = -dE
        elif formalism == "contact":
            theta[sp.s] = 1.0
        Yv, YJ = Y.value_and_jacobian(x)
        LY = dtheta @ Yv + YJ.T @ theta
        form_res.append(float(np.max(np.abs(LY))))
        en_res.append(abs(float(dE @ Yv)))
        contraction = float(theta @ Yv)
        fvals.append(-contraction if formalism == "contact" else contraction)
        if formalism == "cosymplectic":
            tres.append(float(np.max(np.abs(YJ[sp.t]))))
    return NoetherReport(max(form_res), max(en_res), np.array(fvals), samples,
                         max(tres) if tres else 0.0)


@dataclass
class MonitorReport:
    mode: str
    max_abs: float
    max_rel: float
    values: np.ndarray
    reference: np.ndarray


def monitor(traj: Trajectory, quantity: Expr | Callable[[float, np.ndarray], float],
            mode: str = "conserve", rate: Expr | Callable | None = None,
            params: Params = None) -> MonitorReport:
    """Compare a quantity along a trajectory with its predicted evolution.

    ``conserve`` compares against the initial value; ``decay`` against
    f(0) exp(-int_0^t rate), the rate being evaluated on the samples and
    integrated by the trapezoid rule.
    """
    def along(q):
        if isinstance(q, Expr):
            return traj.evaluate(q, params)
        return np.array([q(t, x) for t, x in zip(traj.times, traj.states)])

    f = along(quantity)
    if mode == "conserve":
        ref = np.full_like(f, f[0])
    elif mode == "decay":
        if rate is None:
            raise ValueError("decay mode needs a rate")
        r = along(rate) if not isinstance(rate, (int, float)) else np.full_like(f, float(rate))
        ref = f[0] * np.exp(-cumulative_trapezoid(r, traj.times, initial=0.0))
    else:
        raise ValueError(f"unknown monitor mode {mode!r}")
    dev = np.abs(f - ref)
    scale = np.maximum(np.abs(ref), 1e-300)
    return MonitorReport(mode, float(dev.max()), float((dev / scale).max()), f, ref)
