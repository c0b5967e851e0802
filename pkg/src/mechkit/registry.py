"""
Built-in example systems.

Each entry carries its Lagrangian and Hamiltonian with default parameters,
initial data, known symmetry generators and the quantities whose
behaviour (conserved, or decaying at a given rate) the check battery
re-verifies. Entries export to the same JSON format the CLI reads.
"""
from __future__ import annotations

import copy
import math

from .system import Quantity, Symmetry, SystemError, SystemSpec, validate

_KEPLER_L = "0.5*m*(vr^2 + r^2*vphi^2) - K/r"
_KEPLER_H = "(pr^2 + pphi^2/r^2)/(2*m) + K/r"


def _builtin() -> list[SystemSpec]:
    return [
        SystemSpec(
            id="harmonic-oscillator",
            title="One-dimensional harmonic oscillator",
            formalism="symplectic",
            coordinates=("q",), velocities=("v",), momenta=("p",),
            lagrangian="0.5*(m*v^2 - k*q^2)",
            hamiltonian="p^2/(2*m) + 0.5*k*q^2",
            params={"m": 1.0, "k": 1.0},
            quantities=(Quantity("energy", "0.5*(m*v^2 + k*q^2)", "conserved", tol=1e-8),),
            initial={"q": 1.0, "v": 0.0},
            t_span=(0.0, 10.0),
            paper_deviation="The printed Hamiltonian has k q^2 without the factor 1/2; its own "
                            "differential and the Legendre image of E_L need k q^2 / 2, used here.",
        ),
        SystemSpec(
            id="kepler",
            title="Central force in the plane (Kepler problem)",
            formalism="symplectic",
            coordinates=("r", "phi"),
            lagrangian=_KEPLER_L,
            hamiltonian=_KEPLER_H,
            params={"m": 1.0, "K": -1.0},
            symmetries=(Symmetry("rotation", ("0", "1"), "tangent", True, "m*r^2*vphi"),),
            quantities=(
                Quantity("energy", "0.5*m*(vr^2 + r^2*vphi^2) + K/r", "conserved", tol=1e-8),
                Quantity("angular_momentum", "m*r^2*vphi", "conserved", tol=1e-9),
                Quantity("radius", "r", "conserved", tol=1e-6),
            ),
            # circular orbit: r vphi^2 = -K/(m r^2) at r = 1
            initial={"r": 1.0, "phi": 0.0, "vr": 0.0, "vphi": 1.0},
            t_span=(0.0, 2 * math.pi),
            notes=("The default initial data is a circular orbit, so the radius is a conserved "
                   "quantity of this particular run only.",),
        ),
        SystemSpec(
            id="forced-oscillator",
            title="Harmonic oscillator with periodic forcing",
            formalism="cosymplectic",
            coordinates=("q",), velocities=("v",), momenta=("p",),
            lagrangian="0.5*(m*v^2 - k*q^2) + A*q*cos(w*t)",
            hamiltonian="p^2/(2*m) + 0.5*k*q^2 - A*q*cos(w*t)",
            params={"m": 1.0, "k": 1.0, "A": 2.0, "w": 0.5},
            symmetries=(Symmetry("translation", ("1",), "tangent", False),),
            quantities=(Quantity("energy", "0.5*(m*v^2 + k*q^2)", "none"),),
            initial={"t": 0.0, "q": 1.0, "v": 0.0},
            t_span=(0.0, 10.0),
            notes=("The forcing frequency defaults to w = 0.5, away from the resonance "
                   "w = sqrt(k/m), so the closed-form steady state exists.",),
            paper_deviation="The Hamiltonian uses k q^2 / 2 for consistency with the Lagrangian.",
        ),
        SystemSpec(
            id="variable-mass-kepler",
            title="Central force acting on a particle of time-dependent mass",
            formalism="cosymplectic",
            coordinates=("r", "phi"),
            lagrangian="0.5*m0*(1 + kappa*t)*(vr^2 + r^2*vphi^2) - K/r",
            hamiltonian="(pr^2 + pphi^2/r^2)/(2*m0*(1 + kappa*t)) + K/r",
            params={"m0": 1.0, "kappa": 0.1, "K": -1.0},
            symmetries=(Symmetry("rotation", ("0", "1"), "tangent", True,
                                 "m0*(1 + kappa*t)*r^2*vphi"),),
            quantities=(Quantity("angular_momentum", "m0*(1 + kappa*t)*r^2*vphi", "conserved",
                                 tol=1e-6),),
            initial={"t": 0.0, "r": 1.0, "phi": 0.0, "vr": 0.0, "vphi": 1.0},
            t_span=(0.0, 10.0),
            notes=("The mass law m(t) = m0 (1 + kappa t) is a default choice; any smooth "
                   "positive m(t) can be substituted in the expressions.",),
            paper_deviation="The Reeb field is -(dm/dt)/m (v_r d/dv_r + v_phi d/dv_phi), the sign "
                            "given by its defining linear system; the energy satisfies "
                            "dE_L/dt = -dL/dt.",
        ),
        SystemSpec(
            id="damped-oscillator",
            title="Harmonic oscillator with linear damping",
            formalism="contact",
            coordinates=("q",), velocities=("v",), momenta=("p",),
            lagrangian="0.5*(m*v^2 - k*q^2) - gamma*s",
            hamiltonian="p^2/(2*m) + 0.5*k*q^2 + gamma*s",
            params={"m": 1.0, "k": 1.0, "gamma": 0.1},
            quantities=(Quantity("energy", "0.5*(m*v^2 + k*q^2) + gamma*s", "decay", "gamma",
                                 tol=1e-5, relative=True),),
            initial={"q": 1.0, "v": 0.0, "s": 0.0},
            t_span=(0.0, 10.0),
            paper_deviation="The printed Hamiltonian has p^2/(2 m^2); the field and the Legendre "
                            "map p = m v require p^2/(2 m), used here.",
        ),
        SystemSpec(
            id="kepler-friction",
            title="Central force with linear friction",
            formalism="contact",
            coordinates=("r", "phi"),
            lagrangian=_KEPLER_L + " - gamma*s",
            hamiltonian=_KEPLER_H + " + gamma*s",
            params={"m": 1.0, "K": -1.0, "gamma": 0.1},
            symmetries=(Symmetry("rotation", ("0", "1"), "tangent", True, "m*r^2*vphi"),),
            quantities=(
                Quantity("angular_momentum", "m*r^2*vphi", "decay", "gamma", tol=1e-6, relative=True),
                Quantity("energy", "0.5*m*(vr^2 + r^2*vphi^2) + K/r + gamma*s", "decay", "gamma",
                         tol=1e-5, relative=True),
            ),
            initial={"r": 1.0, "phi": 0.0, "vr": 0.0, "vphi": 1.0, "s": 0.0},
            t_span=(0.0, 5.0),
            paper_deviation="The unified-formalism angular acceleration is computed from the "
                            "general tangency condition; the printed gamma p_phi / m term is "
                            "dimensionally inconsistent with it.",
        ),
        SystemSpec(
            id="free-particle",
            title="Free particle on a line",
            formalism="symplectic",
            coordinates=("q",), velocities=("v",), momenta=("p",),
            lagrangian="0.5*v^2",
            hamiltonian="0.5*p^2",
            symmetries=(Symmetry("translation", ("1",), "tangent", True, "v"),),
            quantities=(Quantity("momentum", "v", "conserved", tol=1e-12),),
            initial={"q": 0.0, "v": 2.0},
            t_span=(0.0, 10.0),
        ),
        SystemSpec(
            id="sphere-geodesic",
            title="Geodesics of the unit sphere",
            formalism="riemann-newton",
            coordinates=("th", "ph"),
            metric=(("1", "0"), ("0", "sin(th)^2")),
            quantities=(Quantity("speed", "vth^2 + sin(th)^2*vph^2", "conserved", tol=1e-8),),
            initial={"th": math.pi / 2, "ph": 0.0, "vth": 0.5, "vph": 1.0},
            t_span=(0.0, 10.0),
            sample_radius=0.4,
            notes=("Starting on the equator with a tilted velocity gives a great circle that "
                   "stays clear of the coordinate poles.",),
        ),
        SystemSpec(
            id="polar-kepler",
            title="Kepler problem as Newtonian motion in the polar-coordinate plane",
            formalism="riemann-newton",
            coordinates=("r", "phi"),
            metric=(("m", "0"), ("0", "m*r^2")),
            potential="K/r",
            params={"m": 1.0, "K": -1.0},
            quantities=(
                Quantity("energy", "0.5*m*(vr^2 + r^2*vphi^2) + K/r", "conserved", tol=1e-8),
                Quantity("angular_momentum", "m*r^2*vphi", "conserved", tol=1e-8),
            ),
            initial={"r": 1.0, "phi": 0.0, "vr": 0.1, "vphi": 1.1},
            t_span=(0.0, 10.0),
        ),
    ]


_REGISTRY: dict[str, SystemSpec] | None = None

PAPER_SYSTEMS = ("harmonic-oscillator", "kepler", "forced-oscillator", "variable-mass-kepler",
                 "damped-oscillator", "kepler-friction")


def _load() -> dict[str, SystemSpec]:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = {s.id: validate(s) for s in _builtin()}
    return _REGISTRY


def get(system_id: str) -> SystemSpec:
    """A fresh copy of a registered system (safe to modify)."""
    reg = _load()
    try:
        spec = reg[system_id]
    except KeyError:
        raise SystemError(f"unknown system {system_id!r}; known: {', '.join(sorted(reg))}") from None
    out = copy.copy(spec)
    out.params = dict(spec.params)
    out.initial = dict(spec.initial)
    for k in ("L", "h", "chart", "metric_field", "force_field", "constraint_exprs"):
        out.__dict__.pop(k, None)
    return out


def list_systems() -> list[tuple[str, str]]:
    return [(s.id, s.formalism) for s in _load().values()]


def ids() -> list[str]:
    return list(_load())


def export(system_id: str) -> dict:
    return get(system_id).to_json()
