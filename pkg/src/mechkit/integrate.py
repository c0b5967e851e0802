"""
Trajectory integration: classical fixed-step RK4 and the adaptive
Dormand-Prince 5(4) embedded pair, with cubic Hermite dense output and
per-sample monitor channels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .expr import Expr, VarLayout, evaluate

Rhs = Callable[[float, np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time!r}")
        self.time = time


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "dopri5"
    rtol: float = 1e-10
    atol: float = 1e-10
    dt: float | None = None
    min_step: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "rk4" and not self.dt:
            raise ValueError("rk4 needs a positive dt")


@dataclass(frozen=True)
class Monitor:
    name: str
    fn: Callable[[float, np.ndarray], float]


def attach_monitor(name: str, quantity: Expr | Callable[[float, np.ndarray], float],
                   layout: VarLayout | None = None,
                   params: Mapping[str, float] | None = None) -> Monitor:
    """Build a monitor channel.

    ``quantity`` is either an expression over ``layout`` (evaluated with
    ``params``) or a callable ``fn(t, x)``.
    """
    if isinstance(quantity, Expr):
        if layout is None:
            raise ValueError("expression monitors need a layout")
        params = dict(params or {})
        return Monitor(name, lambda t, x: evaluate(quantity, layout, x, params))
    return Monitor(name, quantity)


def time_monitor(name: str = "time") -> Monitor:
    return Monitor(name, lambda t, x: t)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    names: tuple[str, ...]
    monitors: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        if name in self.monitors:
            return self.monitors[name]
        return self.states[:, self.names.index(name)]

    def __len__(self) -> int:
        return len(self.times)

    def evaluate(self, quantity: Expr, params: Mapping[str, float] | None = None) -> np.ndarray:
        layout = VarLayout(self.names)
        return np.array([evaluate(quantity, layout, x, params) for x in self.states])


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)
# continuous extension of order 4 (Hairer, Norsett & Wanner, dopri5 contd5)
_D = (
    -12715105075 / 11282082432, 0.0, 87487479700 / 32700410799, -10690763975 / 1880347072,
    701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423,
)


def _call(rhs: Rhs, t: float, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(rhs(t, x), dtype=float)
    except Exception as exc:  # any field failure is reported with its time
        raise IntegrationError(f"field evaluation failed ({exc})", t) from exc
    if not np.all(np.isfinite(out)):
        raise IntegrationError("field returned non-finite components", t)
    return out


def dopri_dense(y0, y1, k, h):
    """Interpolant on one accepted Dormand-Prince step, as a function of theta."""
    dy = y1 - y0
    b = h * k[0] - dy
    c = dy - h * k[6] - b
    d = h * sum(dj * k[j] for j, dj in enumerate(_D) if dj)

    def at(th):
        th1 = 1.0 - th
        return y0 + th * (dy + th1 * (b + th * (c + th1 * d)))

    return at


def hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    th = (t - t0) / h
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th * th * (3 - 2 * th)
    h11 = th * th * (th - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


class _Recorder:
    def __init__(self, sample_times, monitors):
        self.sample = None if sample_times is None else np.asarray(sample_times, dtype=float)
        self.k = 0
        self.times: list[float] = []
        self.states: list[np.ndarray] = []
        self.monitors = monitors

    def start(self, t, y):
        if self.sample is None:
            self._push(t, y)
        else:
            while self.k < len(self.sample) and self.sample[self.k] <= t:
                self._push(float(self.sample[self.k]), y)
                self.k += 1

    def step(self, t0, y0, f0, t1, y1, f1, dense=None):
        if self.sample is None:
            self._push(t1, y1)
            return
        while self.k < len(self.sample) and self.sample[self.k] <= t1:
            ts = float(self.sample[self.k])
            if ts == t1:
                ys = y1
            elif dense is not None:
                ys = dense((ts - t0) / (t1 - t0))
            else:
                ys = hermite(t0, y0, f0, t1, y1, f1, ts)
            self._push(ts, ys)
            self.k += 1

    def _push(self, t, y):
        self.times.append(t)
        self.states.append(np.array(y, dtype=float))


def _initial_step(rhs, t0, y0, f0, direction_span, cfg):
    sc = cfg.atol + cfg.rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / sc)
    d1 = np.max(np.abs(f0) / sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    f1 = _call(rhs, t0 + h0, y1)
    d2 = np.max(np.abs(f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_span, cfg.max_step)


def integrate(rhs: Rhs, x0, t_span: tuple[float, float],
              config: IntegratorConfig | None = None, *,
              sample_times: Sequence[float] | None = None,
              names: Sequence[str] | None = None,
              monitors: Iterable[Monitor] = (),
              system_id: str | None = None) -> Trajectory:
    """Integrate ``dx/dt = rhs(t, x)`` over ``t_span``.

    Without ``sample_times`` every accepted step is recorded; otherwise the
    trajectory is interpolated at the requested times.
    """
    cfg = config or IntegratorConfig()
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError(f"t_span must be increasing, got {t_span}")
    y = np.array(x0, dtype=float)
    if sample_times is not None:
        st = np.asarray(sample_times, dtype=float)
        if np.any(np.diff(st) <= 0) or st[0] < t0 or st[-1] > t1:
            raise ValueError("sample_times must be strictly increasing inside t_span")
    monitors = tuple(monitors)
    rec = _Recorder(sample_times, monitors)
    stats = {"accepted": 0, "rejected": 0, "evaluations": 0}

    t = t0
    f = _call(rhs, t, y)
    stats["evaluations"] += 1
    rec.start(t, y)

    if cfg.method == "rk4":
        nsteps = max(1, int(round((t1 - t0) / cfg.dt)))
        h = (t1 - t0) / nsteps
        for i in range(nsteps):
            k1 = f
            k2 = _call(rhs, t + h / 2, y + h / 2 * k1)
            k3 = _call(rhs, t + h / 2, y + h / 2 * k2)
            k4 = _call(rhs, t + h, y + h * k3)
            ynew = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            tnew = t0 + (i + 1) * h
            fnew = _call(rhs, tnew, ynew)
            stats["evaluations"] += 4
            stats["accepted"] += 1
            rec.step(t, y, f, tnew, ynew, fnew)
            t, y, f = tnew, ynew, fnew
    else:
        h = cfg.dt or _initial_step(rhs, t, y, f, t1 - t0, cfg)
        stats["evaluations"] += 0 if cfg.dt else 1
        k = [f] + [None] * 6
        while t < t1:
            if stats["accepted"] + stats["rejected"] > cfg.max_steps:
                raise IntegrationError("maximum number of steps exceeded", t)
            last = t + h >= t1 or (t1 - (t + h)) < cfg.min_step
            if last:
                h = t1 - t
            with np.errstate(over="ignore", invalid="ignore"):
                for s in range(1, 7):
                    ys = y + h * sum(a * k[j] for j, a in enumerate(_A[s]) if a)
                    k[s] = _call(rhs, t + _C[s] * h, ys)
            stats["evaluations"] += 6
            ynew = ys  # stage 7 point is the 5th order solution (FSAL)
            err = h * sum(e * k[j] for j, e in enumerate(_E) if e)
            tol = cfg.atol + cfg.rtol * max(np.max(np.abs(y)), np.max(np.abs(ynew)))
            en = np.max(np.abs(err)) / tol
            if en <= 1.0:
                tnew = t1 if last else t + h
                dense = dopri_dense(y, ynew, list(k), tnew - t) if rec.sample is not None else None
                rec.step(t, y, k[0], tnew, ynew, k[6], dense)
                t, y = tnew, ynew
                k[0] = k[6]
                stats["accepted"] += 1
                fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
                h = min(h * fac, cfg.max_step)
            else:
                stats["rejected"] += 1
                h *= max(0.2, 0.9 * en ** -0.2)
                if h < cfg.min_step:
                    raise IntegrationError(f"step size underflow (h={h:.3e})", t)

    times = np.array(rec.times)
    states = np.array(rec.states)
    mons = {m.name: np.array([m.fn(tt, xx) for tt, xx in zip(times, states)]) for m in monitors}
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(len(y)))
    meta = {"system": system_id, "config": asdict(cfg), "steps": stats}
    return Trajectory(times, states, names, mons, meta)
