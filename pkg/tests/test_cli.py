import csv
import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mechkit import registry
from mechkit.cli import main


def run(argv, tmp_path, name="report.json"):
    out = tmp_path / name
    code = main(["--report", str(out)] + list(argv))
    return code, json.loads(out.read_text())


class TestDerive:
    def test_harmonic_oscillator(self, tmp_path):
        code, rep = run(["derive", "--system", "harmonic-oscillator", "--point", "q=1,v=0"], tmp_path)
        res = rep["report"]["results"]
        assert code == 0
        assert res["field"] == {"q": 0.0, "v": -1.0}
        assert res["energy"] == 0.5

    def test_damped(self, tmp_path):
        code, rep = run(["derive", "--system", "damped-oscillator", "--point", "q=1,v=0,s=0"], tmp_path)
        assert rep["report"]["results"]["field"] == {"q": 0.0, "v": -1.0, "s": -0.5}
        assert rep["report"]["results"]["reeb_energy"] == pytest.approx(0.1)

    def test_cotangent_and_unified_sides(self, tmp_path):
        _, rep = run(["derive", "--system", "kepler", "--side", "cotangent",
                      "--point", "r=1,phi=0,pr=0,pphi=1"], tmp_path)
        assert rep["report"]["results"]["field"]["pr"] == pytest.approx(0.0, abs=1e-15)
        _, rep = run(["derive", "--system", "kepler", "--side", "unified",
                      "--point", "r=1,phi=0,vr=0,vphi=1"], tmp_path)
        assert rep["report"]["results"]["constraint"] == [0.0, 0.0]

    def test_riemann(self, tmp_path):
        _, rep = run(["derive", "--system", "sphere-geodesic", "--point", "th=1.0,ph=0,vth=0,vph=1"],
                     tmp_path)
        assert rep["report"]["results"]["scalar_curvature"] == pytest.approx(2.0)

    def test_missing_coordinate(self, tmp_path):
        code, rep = run(["derive", "--system", "harmonic-oscillator", "--point", "v=0"], tmp_path)
        assert code == 2
        assert "missing coordinate(s): q" in rep["report"]["error"]

    def test_malformed_point(self, tmp_path):
        code, rep = run(["derive", "--system", "harmonic-oscillator", "--point", "q1"], tmp_path)
        assert code == 2 and "name=value" in rep["report"]["error"]

    def test_unknown_system(self, tmp_path):
        code, rep = run(["derive", "--system", "nowhere", "--point", "q=1"], tmp_path)
        assert code == 2


class TestSimulate:
    def test_kepler_csv(self, tmp_path):
        path = tmp_path / "k.csv"
        code, rep = run(["simulate", "--system", "kepler", "--out", str(path)], tmp_path)
        assert code == 0
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["t", "r", "phi", "vr", "vphi", "energy", "angular_momentum", "radius"]
        data = np.array(rows[1:], dtype=float)
        assert np.max(np.abs(data[:, 1] - 1.0)) <= 1e-6
        for cell in rows[5]:
            assert cell == format(float(cell), ".17g")

    def test_fixed_output_grid(self, tmp_path):
        path = tmp_path / "h.csv"
        run(["simulate", "--system", "harmonic-oscillator", "--dt", "0.5", "--out", str(path)], tmp_path)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        np.testing.assert_allclose(data[:, 0], np.arange(0, 10.01, 0.5))
        np.testing.assert_allclose(data[:, 1], np.cos(data[:, 0]), atol=1e-8)

    def test_time_column_not_duplicated(self, tmp_path):
        path = tmp_path / "f.csv"
        run(["simulate", "--system", "forced-oscillator", "--out", str(path)], tmp_path)
        assert path.read_text().splitlines()[0] == "t,q,v,energy"

    def test_kepler_friction_rate(self, tmp_path):
        code, rep = run(["simulate", "--system", "kepler-friction", "--out", str(tmp_path / "x.csv")],
                        tmp_path)
        (pphi,) = [r for r in rep["report"]["results"] if r["quantity"] == "angular_momentum"]
        assert code == 0
        assert abs(pphi["fitted_rate"] - 0.1) <= 1e-4

    def test_json_format(self, tmp_path):
        path = tmp_path / "o.json"
        run(["simulate", "--system", "free-particle", "--format", "json", "--out", str(path)], tmp_path)
        doc = json.loads(path.read_text())
        assert doc["columns"] == ["t", "q", "v", "momentum"]
        assert doc["states"]["v"][-1] == 2.0

    def test_unified_side_monitors_constraint(self, tmp_path):
        code, rep = run(["simulate", "--system", "damped-oscillator", "--side", "unified",
                         "--out", str(tmp_path / "u.csv")], tmp_path)
        (c,) = [r for r in rep["report"]["results"] if r["quantity"] == "constraint"]
        assert code == 0 and c["max_drift"] <= 1e-6

    def test_rk4(self, tmp_path):
        code, rep = run(["simulate", "--system", "harmonic-oscillator", "--method", "rk4",
                         "--dt", "0.01", "--out", str(tmp_path / "r.csv")], tmp_path)
        assert code == 0 and rep["report"]["config"]["method"] == "rk4"

    def test_reversed_span(self, tmp_path):
        code, rep = run(["simulate", "--system", "kepler", "--tspan", "3,1"], tmp_path)
        assert code == 2 and "increasing" in rep["report"]["error"]


class TestCheck:
    def test_all_parallel(self, tmp_path):
        code, rep = run(["check", "--all", "--workers", "3"], tmp_path)
        assert code == 0
        assert {s["system"] for s in rep["report"]["systems"]} == set(registry.ids())

    def test_corrupted_hamiltonian(self, tmp_path):
        doc = registry.export("harmonic-oscillator")
        doc["hamiltonian"] = "p^2/(2*m) + k*q^2"
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, rep = run(["check", "--system", str(path)], tmp_path)
        assert code == 1
        (eq,) = [c for c in rep["report"]["systems"][0]["checks"] if c["name"] == "legendre_equivalence"]
        assert not eq["passed"] and eq["value"] > 1e-3

    def test_singular_lagrangian(self, tmp_path):
        doc = registry.export("harmonic-oscillator")
        doc.update(lagrangian="q*v", hamiltonian="0", id="singular")
        path = tmp_path / "sing.json"
        path.write_text(json.dumps(doc))
        code, rep = run(["check", "--system", str(path)], tmp_path)
        err = rep["report"]["systems"][0]["error"]
        assert code == 1
        assert err.startswith("SingularLagrangian") and "at point" in err

    def test_needs_target(self, tmp_path):
        code, _ = run(["check"], tmp_path)
        assert code == 2


class TestWrappers:
    def test_symmetry_kepler(self, tmp_path):
        code, rep = run(["symmetry", "--system", "kepler", "--generator", "0,1", "--expect", "noether"],
                        tmp_path)
        res = rep["report"]["results"]
        assert code == 0 and res["noether"]
        pts = np.array(res["samples"])
        np.testing.assert_allclose(res["f_at_samples"], pts[:, 0] ** 2 * pts[:, 3])

    def test_symmetry_forced_translation(self, tmp_path):
        code, rep = run(["symmetry", "--system", "forced-oscillator", "--generator", "1",
                         "--expect", "noether"], tmp_path)
        assert code == 1 and not rep["report"]["results"]["noether"]

    def test_hj_free_particle(self, tmp_path):
        code, rep = run(["hj", "--system", "free-particle", "--S", "a*q", "--param", "a=1.5",
                         "--grid", "q=-2:2:9"], tmp_path)
        assert code == 0
        assert rep["report"]["results"]["deviation"] == 0.0
        assert rep["report"]["results"]["field_first"] == [1.5]

    def test_hj_wrong_S(self, tmp_path):
        code, _ = run(["hj", "--system", "harmonic-oscillator", "--S", "q^3", "--grid", "q=-1:1:11"],
                      tmp_path)
        assert code == 1

    def test_geodesic_sphere(self, tmp_path):
        code, rep = run(["geodesic", "--system", "sphere-geodesic"], tmp_path)
        speed = rep["report"]["results"][0]          # metric speed check comes first
        assert code == 0 and speed["quantity"] == "speed" and speed["max_drift"] <= 1e-8

    def test_geodesic_rejects_lagrangian_system(self, tmp_path):
        code, _ = run(["geodesic", "--system", "kepler"], tmp_path)
        assert code == 2


class TestMisc:
    def test_list_and_export_validate(self, tmp_path):
        _, rep = run(["list"], tmp_path)
        assert {s["id"] for s in rep["report"]["systems"]} == set(registry.ids())
        path = tmp_path / "kf.json"
        run(["export", "kepler-friction", "--out", str(path)], tmp_path)
        code, rep = run(["validate", str(path)], tmp_path)
        assert code == 0 and rep["report"]["formalism"] == "contact"

    def test_validate_bad_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"id": "x", "formalism": "symplectic"}))
        code, rep = run(["validate", str(path)], tmp_path)
        assert code == 2 and "coordinates" in rep["report"]["error"]

    def test_deterministic_digest(self, tmp_path):
        _, a = run(["check", "--system", "kepler-friction"], tmp_path, "a.json")
        _, b = run(["check", "--system", "kepler-friction"], tmp_path, "b.json")
        assert a["report"] == b["report"] and a["digest"] == b["digest"]
        body = json.dumps(a["report"], sort_keys=True, separators=(",", ":"))
        assert hashlib.sha256(body.encode()).hexdigest() == a["digest"]

    def test_module_entry_and_log_level(self, tmp_path):
        outs = []
        for level in ("debug", "error"):
            env = {**os.environ, "MECHKIT_LOG": level}
            p = subprocess.run([sys.executable, "-m", "mechkit", "derive", "--system", "kepler",
                                "--point", "r=1,phi=0,vr=0,vphi=1"],
                               capture_output=True, text=True, env=env, check=True)
            outs.append(json.loads(p.stdout))
        assert outs[0]["report"] == outs[1]["report"]
