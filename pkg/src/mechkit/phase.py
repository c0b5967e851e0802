"""
Coordinate charts, field results and the derivative bundles shared by the
dynamics modules.

A :class:`Chart` names the configuration coordinates together with their
velocity and momentum partners. Phase points are flat float arrays laid out
as ``[t] q.. (v.. | p.. | v.. p..) [s]`` with the time slot present for
nonautonomous systems and the action slot for contact systems.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .autodiff import SingularMatrix, eval_hyperdual, solve
from .expr import Expr, VarLayout


class SingularLagrangian(ArithmeticError):
    """Velocity Hessian is not invertible at the evaluation point."""

    def __init__(self, point, pivot_index: int | None = None):
        point = np.asarray(point, dtype=float)
        super().__init__(
            f"singular Lagrangian at point {point.tolist()}"
            + (f" (pivot {pivot_index})" if pivot_index is not None else "")
        )
        self.point = point
        self.pivot_index = pivot_index


class OffConstraint(ValueError):
    """Point is not on the Legendre constraint surface."""


@dataclass(frozen=True)
class Chart:
    coordinates: tuple[str, ...]
    velocities: tuple[str, ...] = ()
    momenta: tuple[str, ...] = ()
    time: str = "t"
    action: str = "s"

    def __post_init__(self):
        q = tuple(self.coordinates)
        v = tuple(self.velocities) or tuple("v" + c for c in q)
        p = tuple(self.momenta) or tuple("p" + c for c in q)
        object.__setattr__(self, "coordinates", q)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "momenta", p)
        if not (len(q) == len(v) == len(p)) or not q:
            raise ValueError("coordinates, velocities and momenta must have equal nonzero length")
        VarLayout(q + v + p + (self.time, self.action))  # uniqueness / identifier check

    @property
    def n(self) -> int:
        return len(self.coordinates)

    def _layout(self, middle: tuple[str, ...], time: bool, action: bool) -> VarLayout:
        return VarLayout(((self.time,) if time else ()) + self.coordinates + middle
                         + ((self.action,) if action else ()))

    def tangent(self, time: bool = False, action: bool = False) -> VarLayout:
        return self._layout(self.velocities, time, action)

    def cotangent(self, time: bool = False, action: bool = False) -> VarLayout:
        return self._layout(self.momenta, time, action)

    def pontryagin(self, time: bool = False, action: bool = False) -> VarLayout:
        return self._layout(self.velocities + self.momenta, time, action)


@dataclass
class FieldEval:
    """Components of a vector field at one phase point."""

    names: tuple[str, ...]
    components: np.ndarray
    extras: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return float(self.components[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {n: float(c) for n, c in zip(self.names, self.components)}


@dataclass
class Split:
    """Index bookkeeping for a phase layout."""

    t: int | None
    q: list[int]
    v: list[int]
    p: list[int]
    s: int | None


def split(chart: Chart, layout: VarLayout) -> Split:
    ix = layout.index
    return Split(
        ix.get(chart.time),
        [ix[c] for c in chart.coordinates],
        [ix[c] for c in chart.velocities if c in ix],
        [ix[c] for c in chart.momenta if c in ix],
        ix.get(chart.action),
    )


@dataclass
class LagrangianData:
    """First and second derivatives of a Lagrangian at a tangent point.

    ``cross_q[i, j]`` is the mixed partial d2L/dq^j dv^i. ``dt``/``dtv``
    and ``ds``/``dsv`` are filled only when the layout carries time or
    action.
    """

    value: float
    energy: float
    grad_q: np.ndarray
    p: np.ndarray
    W: np.ndarray
    cross_q: np.ndarray
    dt: float = 0.0
    dtv: np.ndarray | None = None
    ds: float = 0.0
    dsv: np.ndarray | None = None
    hess: np.ndarray | None = field(default=None, repr=False)


def lagrangian_jet(L: Expr, chart: Chart, x, params: Mapping[str, float] | None,
                   layout: VarLayout) -> LagrangianData:
    """Evaluate L and its derivatives on a layout containing q and v.

    Any momenta present in the layout are left inactive.
    """
    sp = split(chart, layout)
    active = [layout.names[i] for i in ([sp.t] if sp.t is not None else []) + sp.q + sp.v
              + ([sp.s] if sp.s is not None else [])]
    hd = eval_hyperdual(L, layout, x, active, params)
    H = hd.hessian()
    g = hd.grad
    pos = {name: i for i, name in enumerate(active)}
    iq = [pos[c] for c in chart.coordinates]
    iv = [pos[c] for c in chart.velocities]
    p = g[iv]
    v = np.asarray(x, dtype=float)[sp.v]
    data = LagrangianData(
        value=hd.value,
        energy=float(v @ p - hd.value),
        grad_q=g[iq],
        p=p,
        W=H[np.ix_(iv, iv)],
        cross_q=H[np.ix_(iv, iq)],
        hess=H,
    )
    if sp.t is not None:
        it = pos[chart.time]
        data.dt = float(g[it])
        data.dtv = H[iv, it]
    if sp.s is not None:
        is_ = pos[chart.action]
        data.ds = float(g[is_])
        data.dsv = H[iv, is_]
    return data


def solve_velocity_hessian(W: np.ndarray, rhs: np.ndarray, point) -> np.ndarray:
    try:
        return solve(W, rhs)
    except SingularMatrix as exc:
        raise SingularLagrangian(point, exc.pivot_index) from exc


def hamiltonian_jet(h: Expr, chart: Chart, x, params, layout: VarLayout):
    """Gradient and Hessian of h over the whole layout, plus index split."""
    hd = eval_hyperdual(h, layout, x, None, params)
    return hd, split(chart, layout)


def as_point(x: Sequence[float] | Mapping[str, float], layout: VarLayout) -> np.ndarray:
    """Accept either an array in layout order or a name -> value mapping."""
    if isinstance(x, Mapping):
        missing = [n for n in layout.names if n not in x]
        if missing:
            raise ValueError(f"point is missing coordinate(s): {', '.join(missing)}")
        return np.array([float(x[n]) for n in layout.names])
    arr = np.asarray(x, dtype=float)
    if arr.shape != (len(layout),):
        raise ValueError(f"point has shape {arr.shape}, expected ({len(layout)},)")
    return arr
