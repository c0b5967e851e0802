"""
System descriptions: the in-memory :class:`SystemSpec` and its JSON form.

A system names its coordinates, carries a Lagrangian and/or Hamiltonian
(or a metric and force for Newtonian systems on a Riemannian manifold),
parameter defaults, known symmetry generators, monitored quantities and
initial data. The JSON schema shipped in ``mechkit/data`` is the same one
the command line ingests.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .expr import Expr, ExprError, VarLayout, free_identifiers, parse
from .phase import Chart

FAMILIES = {
    "symplectic": "symplectic", "symplectic-lagrangian": "symplectic",
    "symplectic-hamiltonian": "symplectic", "unified-autonomous": "symplectic",
    "cosymplectic": "cosymplectic", "cosymplectic-lagrangian": "cosymplectic",
    "cosymplectic-hamiltonian": "cosymplectic", "unified-extended": "cosymplectic",
    "contact": "contact", "contact-lagrangian": "contact",
    "contact-hamiltonian": "contact", "unified-contact": "contact",
    "riemann-newton": "riemann",
}
UNIFIED_FLAVOR = {"symplectic": "autonomous", "cosymplectic": "extended", "contact": "contact"}


class SystemError(ValueError):
    """Invalid system definition."""


@lru_cache(maxsize=None)
def schema() -> dict:
    with resources.files("mechkit").joinpath("data/system.schema.json").open() as fh:
        return json.load(fh)


@dataclass(frozen=True)
class Symmetry:
    name: str
    components: tuple[str, ...]
    side: str = "tangent"
    noether: bool = True
    f: str | None = None     # expected Noether function / dissipated quantity


@dataclass(frozen=True)
class Quantity:
    name: str
    expr: str
    behavior: str = "none"
    rate: float | str | None = None
    tol: float = 1e-8
    relative: bool = False


@dataclass(eq=False)
class SystemSpec:
    id: str
    formalism: str
    coordinates: tuple[str, ...]
    lagrangian: str | None = None
    hamiltonian: str | None = None
    metric: tuple[tuple[str, ...], ...] | None = None
    force: tuple[str, ...] | None = None
    potential: str | None = None
    constraints: tuple[str, ...] = ()
    params: dict[str, float] = field(default_factory=dict)
    symmetries: tuple[Symmetry, ...] = ()
    quantities: tuple[Quantity, ...] = ()
    initial: dict[str, float] = field(default_factory=dict)
    t_span: tuple[float, float] = (0.0, 10.0)
    velocities: tuple[str, ...] = ()
    momenta: tuple[str, ...] = ()
    title: str = ""
    sample_radius: float = 0.5
    notes: tuple[str, ...] = ()
    paper_deviation: str | None = None

    # -- structure ---------------------------------------------------------
    @property
    def family(self) -> str:
        try:
            return FAMILIES[self.formalism]
        except KeyError:
            raise SystemError(f"unknown formalism {self.formalism!r}") from None

    @property
    def flavor(self) -> str | None:
        return UNIFIED_FLAVOR.get(self.family)

    @cached_property
    def chart(self) -> Chart:
        return Chart(tuple(self.coordinates), tuple(self.velocities), tuple(self.momenta))

    @property
    def n(self) -> int:
        return len(self.coordinates)

    @property
    def has_time(self) -> bool:
        return self.family == "cosymplectic"

    @property
    def has_action(self) -> bool:
        return self.family == "contact"

    def layout(self, side: str) -> VarLayout:
        """Phase layout for ``tangent``, ``cotangent`` or ``unified`` states."""
        c = self.chart
        if self.family == "riemann":
            if side != "tangent":
                raise SystemError("Newtonian systems only have tangent states")
            return c.tangent()
        args = (self.has_time, self.has_action)
        if side == "tangent":
            return c.tangent(*args)
        if side == "cotangent":
            return c.cotangent(*args)
        if side == "unified":
            return c.pontryagin(*args)
        raise SystemError(f"unknown side {side!r}")

    # -- parsed expressions ------------------------------------------------
    def _parse(self, text: str, layout: VarLayout, what: str) -> Expr:
        try:
            e = parse(text, layout.names)
        except ExprError as exc:
            raise SystemError(f"{self.id}: cannot parse {what}: {exc}") from exc
        stray = free_identifiers(e) - set(layout.names) - set(self.params)
        if stray:
            raise SystemError(f"{self.id}: {what} uses unknown identifier(s) {sorted(stray)}")
        return e

    @cached_property
    def L(self) -> Expr | None:
        if self.lagrangian is None:
            return None
        return self._parse(self.lagrangian, self.layout("tangent"), "lagrangian")

    @cached_property
    def h(self) -> Expr | None:
        if self.hamiltonian is None:
            return None
        return self._parse(self.hamiltonian, self.layout("cotangent"), "hamiltonian")

    @cached_property
    def metric_field(self):
        from .riemann import MetricField
        if self.metric is None:
            return None
        q = VarLayout(self.coordinates)
        rows = [[self._parse(e, q, f"metric[{i}][{j}]") for j, e in enumerate(r)]
                for i, r in enumerate(self.metric)]
        return MetricField(tuple(self.coordinates), tuple(tuple(r) for r in rows))

    @cached_property
    def force_field(self):
        from .riemann import ForceField
        if self.force is None and self.potential is None:
            return None
        ff = ForceField.parse(self.coordinates, self.force or (), self.potential,
                              velocities=self.chart.velocities)
        lay = ff.layout
        for e in ff.components + ((ff.potential,) if ff.potential is not None else ()):
            stray = free_identifiers(e) - set(lay.names) - set(self.params)
            if stray:
                raise SystemError(f"{self.id}: force uses unknown identifier(s) {sorted(stray)}")
        return ff

    @cached_property
    def constraint_exprs(self) -> tuple[Expr, ...]:
        lay = self.chart.tangent()
        return tuple(self._parse(c, lay, f"constraint[{i}]") for i, c in enumerate(self.constraints))

    def quantity_expr(self, q: Quantity) -> Expr:
        names = set(self.layout("unified").names) if self.family != "riemann" \
            else set(self.layout("tangent").names) | {"t"}
        e = parse(q.expr, sorted(names))
        stray = free_identifiers(e) - names - set(self.params)
        if stray:
            raise SystemError(f"{self.id}: quantity {q.name!r} uses unknown identifier(s) {sorted(stray)}")
        return e

    def rate_value(self, q: Quantity):
        if q.rate is None or isinstance(q.rate, (int, float)):
            return q.rate
        return self.quantity_expr(Quantity(q.name + "_rate", q.rate))

    # -- states ------------------------------------------------------------
    def default_side(self) -> str:
        if self.family == "riemann":
            return "tangent"
        if self.formalism.startswith("unified"):
            return "unified"
        return "tangent" if self.lagrangian is not None else "cotangent"

    def initial_state(self, side: str, overrides: Mapping[str, float] | None = None) -> np.ndarray:
        """Initial point on ``side``; momenta are filled from the Legendre map
        when only velocities are given (and vice versa is not attempted)."""
        values = dict(self.initial)
        values.update(overrides or {})
        layout = self.layout(side)
        if self.has_time:
            values.setdefault(self.chart.time, 0.0)
        if self.has_action:
            values.setdefault(self.chart.action, 0.0)
        need_p = [p for p in self.chart.momenta if p in layout.names and p not in values]
        if need_p:
            if self.L is None:
                missing = ", ".join(need_p)
                raise SystemError(f"{self.id}: initial data lacks momentum coordinate(s): {missing}")
            from .phase import lagrangian_jet
            tl = self.layout("tangent")
            xt = point_from(values, tl, self.id)
            d = lagrangian_jet(self.L, self.chart, xt, self.params, tl)
            for name, val in zip(self.chart.momenta, d.p):
                values.setdefault(name, float(val))
        return point_from(values, layout, self.id)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id}
        if self.title:
            out["title"] = self.title
        out["formalism"] = self.formalism
        out["coordinates"] = list(self.coordinates)
        if self.velocities:
            out["velocities"] = list(self.velocities)
        if self.momenta:
            out["momenta"] = list(self.momenta)
        for key in ("lagrangian", "hamiltonian", "potential"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.metric is not None:
            out["metric"] = [list(r) for r in self.metric]
        if self.force is not None:
            out["force"] = list(self.force)
        if self.constraints:
            out["constraints"] = list(self.constraints)
        out["params"] = dict(self.params)
        if self.symmetries:
            out["symmetries"] = [
                {k: v for k, v in (("name", s.name), ("components", list(s.components)),
                                   ("side", s.side), ("noether", s.noether), ("f", s.f))
                 if v is not None}
                for s in self.symmetries]
        if self.quantities:
            out["quantities"] = [
                {k: v for k, v in (("name", q.name), ("expr", q.expr), ("behavior", q.behavior),
                                   ("rate", q.rate), ("tol", q.tol), ("relative", q.relative))
                 if v is not None}
                for q in self.quantities]
        out["initial"] = dict(self.initial)
        out["t_span"] = list(self.t_span)
        out["sample_radius"] = self.sample_radius
        if self.notes:
            out["notes"] = list(self.notes)
        if self.paper_deviation:
            out["paper_deviation"] = self.paper_deviation
        return out


def point_from(values: Mapping[str, float], layout: VarLayout, system_id: str = "") -> np.ndarray:
    missing = [n for n in layout.names if n not in values]
    if missing:
        raise SystemError(f"{system_id}: point is missing coordinate(s): {', '.join(missing)}")
    return np.array([float(values[n]) for n in layout.names])


def from_json(doc: Mapping[str, Any]) -> SystemSpec:
    """Validate a JSON document against the schema and build the spec."""
    import jsonschema

    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SystemError(f"schema violation at {where}: {exc.message}") from None
    spec = SystemSpec(
        id=doc["id"],
        formalism=doc["formalism"],
        coordinates=tuple(doc["coordinates"]),
        lagrangian=doc.get("lagrangian"),
        hamiltonian=doc.get("hamiltonian"),
        metric=tuple(tuple(r) for r in doc["metric"]) if "metric" in doc else None,
        force=tuple(doc["force"]) if "force" in doc else None,
        potential=doc.get("potential"),
        constraints=tuple(doc.get("constraints", ())),
        params={k: float(v) for k, v in doc.get("params", {}).items()},
        symmetries=tuple(Symmetry(s["name"], tuple(s["components"]), s.get("side", "tangent"),
                                  s.get("noether", True), s.get("f"))
                         for s in doc.get("symmetries", ())),
        quantities=tuple(Quantity(q["name"], q["expr"], q.get("behavior", "none"), q.get("rate"),
                                  q.get("tol", 1e-8), q.get("relative", False))
                         for q in doc.get("quantities", ())),
        initial={k: float(v) for k, v in doc.get("initial", {}).items()},
        t_span=tuple(doc.get("t_span", (0.0, 10.0))),
        velocities=tuple(doc.get("velocities", ())),
        momenta=tuple(doc.get("momenta", ())),
        title=doc.get("title", ""),
        sample_radius=doc.get("sample_radius", 0.5),
        notes=tuple(doc.get("notes", ())),
        paper_deviation=doc.get("paper_deviation"),
    )
    validate(spec)
    return spec


def validate(spec: SystemSpec) -> SystemSpec:
    """Structural checks beyond the schema: dimensions, parsing, identifiers."""
    fam = spec.family
    try:
        spec.chart
    except ValueError as exc:
        raise SystemError(f"{spec.id}: {exc}") from None
    if fam == "riemann":
        if spec.metric is None:
            raise SystemError(f"{spec.id}: riemann-newton systems need a metric")
        if len(spec.metric) != spec.n or any(len(r) != spec.n for r in spec.metric):
            raise SystemError(f"{spec.id}: metric must be {spec.n}x{spec.n}")
        if spec.force is not None and len(spec.force) != spec.n:
            raise SystemError(f"{spec.id}: force needs {spec.n} components")
        spec.metric_field, spec.force_field, spec.constraint_exprs
    else:
        if spec.lagrangian is None and spec.hamiltonian is None:
            raise SystemError(f"{spec.id}: give a lagrangian and/or a hamiltonian")
        if spec.formalism.endswith("-lagrangian") or spec.formalism.startswith("unified"):
            if spec.lagrangian is None:
                raise SystemError(f"{spec.id}: formalism {spec.formalism} needs a lagrangian")
        if spec.formalism.endswith("-hamiltonian") and spec.hamiltonian is None:
            raise SystemError(f"{spec.id}: formalism {spec.formalism} needs a hamiltonian")
        spec.L, spec.h
    for q in spec.quantities:
        spec.quantity_expr(q)
        spec.rate_value(q)
    for s in spec.symmetries:
        if s.side not in ("tangent", "cotangent"):
            raise SystemError(f"{spec.id}: symmetry {s.name!r} has unknown side {s.side!r}")
        lay = spec.layout(s.side)
        if len(s.components) not in (spec.n, len(lay)):
            raise SystemError(f"{spec.id}: symmetry {s.name!r} needs {spec.n} configuration "
                              f"or {len(lay)} phase components")
        for c in s.components:
            spec._parse(c, lay, f"symmetry {s.name!r}")
    if not spec.t_span[1] > spec.t_span[0]:
        raise SystemError(f"{spec.id}: t_span must be increasing")
    return spec


def load(path: str | Path) -> SystemSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SystemError(f"{path}: not valid JSON ({exc})") from None
    return from_json(doc)
