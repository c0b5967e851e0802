import json

import numpy as np
import pytest

from mechkit import registry
from mechkit.autodiff import solve
from mechkit.expr import evaluate
from mechkit.phase import lagrangian_jet
from mechkit.riemann import metric_jet
from mechkit.system import SystemError, from_json, load, schema

PAPER = {"harmonic-oscillator", "kepler", "forced-oscillator", "variable-mass-kepler",
         "damped-oscillator", "kepler-friction"}


def test_contents():
    ids = set(registry.ids())
    assert PAPER <= ids
    assert {"free-particle", "sphere-geodesic"} <= ids
    assert set(registry.PAPER_SYSTEMS) == PAPER
    tags = dict(registry.list_systems())
    assert tags["damped-oscillator"] == "contact"
    assert tags["variable-mass-kepler"] == "cosymplectic"


def test_harmonic_oscillator_entry():
    ho = registry.get("harmonic-oscillator")
    assert ho.lagrangian == "0.5*(m*v^2 - k*q^2)"
    assert ho.params == {"m": 1.0, "k": 1.0}


def test_kepler_friction_entry():
    kf = registry.get("kepler-friction")
    assert kf.family == "contact"
    assert kf.lagrangian.replace(" ", "").endswith("-K/r-gamma*s")
    assert [s.components for s in kf.symmetries] == [("0", "1")]
    (pphi,) = [q for q in kf.quantities if q.name == "angular_momentum"]
    assert pphi.behavior == "decay"
    assert evaluate(kf.rate_value(pphi), params=kf.params) == kf.params["gamma"]


def test_variable_mass_unit_rate_is_cosymplectic():
    vm = registry.get("variable-mass-kepler")
    vm.params["kappa"] = 1.0       # m(t) = m0 (1 + t)
    x = vm.initial_state("tangent")
    d = lagrangian_jet(vm.L, vm.chart, x, vm.params, vm.layout("tangent"))
    assert vm.has_time and d.dt == 0.5 and d.W[0, 0] == 1.0


def test_get_returns_independent_copies():
    a = registry.get("kepler")
    a.params["m"] = 99.0
    assert registry.get("kepler").params["m"] == 1.0


def test_unknown_id():
    with pytest.raises(SystemError, match="unknown system"):
        registry.get("nope")


@pytest.mark.parametrize("sid", registry.ids())
def test_regular_at_initial_condition(sid):
    spec = registry.get(sid)
    x = spec.initial_state("tangent")
    if spec.family == "riemann":
        assert np.all(np.linalg.eigvalsh(metric_jet(spec.metric_field, x[:spec.n], spec.params).g) > 0)
    else:
        d = lagrangian_jet(spec.L, spec.chart, x, spec.params, spec.layout("tangent"))
        solve(d.W, np.ones(spec.n))


@pytest.mark.parametrize("sid", registry.ids())
def test_export_round_trip(sid, tmp_path):
    doc = registry.export(sid)
    path = tmp_path / f"{sid}.json"
    path.write_text(json.dumps(doc))
    back = load(path)
    assert back.to_json() == doc


def test_deviation_notes_present():
    for sid in ("harmonic-oscillator", "damped-oscillator", "forced-oscillator"):
        assert registry.get(sid).paper_deviation


class TestSystemFiles:
    def base(self):
        return registry.export("harmonic-oscillator")

    def test_schema_is_json_schema(self):
        assert schema()["$schema"].startswith("https://json-schema.org/")

    def test_missing_required(self):
        doc = self.base()
        del doc["coordinates"]
        with pytest.raises(SystemError, match="schema violation"):
            from_json(doc)

    def test_unknown_formalism(self):
        doc = self.base()
        doc["formalism"] = "quantum"
        with pytest.raises(SystemError):
            from_json(doc)

    def test_bad_expression(self):
        doc = self.base()
        doc["lagrangian"] = "0.5*(m*v^2 - "
        with pytest.raises(Exception, match="lagrangian"):
            from_json(doc)

    def test_unknown_identifier(self):
        doc = self.base()
        doc["lagrangian"] = "0.5*m*w^2"
        with pytest.raises(SystemError):
            from_json(doc)

    def test_reversed_span(self):
        doc = self.base()
        doc["t_span"] = [5.0, 1.0]
        with pytest.raises(SystemError, match="t_span"):
            from_json(doc)

    def test_metric_dimension(self):
        doc = registry.export("sphere-geodesic")
        doc["metric"] = [["1", "0"]]
        with pytest.raises(SystemError):
            from_json(doc)

    def test_symmetry_dimension(self):
        doc = registry.export("kepler")
        doc["symmetries"][0]["components"] = ["0", "1", "0"]
        with pytest.raises(SystemError, match="rotation"):
            from_json(doc)

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text("{nope")
        with pytest.raises(SystemError, match="not valid JSON"):
            load(p)
