import math

import numpy as np
import pytest

from mechkit import registry
from mechkit.analysis import simulate
from mechkit.cosymplectic import MODES, energy_rate, evolution_field, lagrangian_reeb, nonautonomous_el_field
from mechkit.expr import parse
from mechkit.integrate import IntegratorConfig
from mechkit.symplectic import euler_lagrange_field, hamiltonian_field

FO = registry.get("forced-oscillator")
VM = registry.get("variable-mass-kepler")
HO = registry.get("harmonic-oscillator")


def forced_solution(t, q0, v0, m, k, A, w):
    """Closed-form solution of m q'' + k q = A cos(w t), off resonance."""
    w0 = math.sqrt(k / m)
    amp = A / (m * (w0**2 - w**2))
    return (q0 - amp) * np.cos(w0 * t) + v0 / w0 * np.sin(w0 * t) + amp * np.cos(w * t)


class TestEvolutionField:
    def test_forced_oscillator_at_origin(self):
        P = {**FO.params, "w": 1.0}
        X = evolution_field(FO.h, FO.chart, [0.0, 0.0, 0.0], P).components
        np.testing.assert_allclose(X, [1.0, 0.0, 2.0])

    def test_variable_mass_kepler(self):
        X = evolution_field(VM.h, VM.chart, [0.0, 1.0, 0.0, 0.0, 1.0], VM.params).components
        np.testing.assert_allclose(X, [1, 0, 1, 0, 0], atol=1e-15)

    def test_autonomous_reduces_to_symplectic(self, rng):
        c = HO.chart
        for _ in range(10):
            q, p, t = rng.uniform(-2, 2, 3)
            X = evolution_field(HO.h, c, [t, q, p], HO.params).components
            assert X[0] == 1.0
            np.testing.assert_allclose(X[1:], hamiltonian_field(HO.h, c, [q, p], HO.params).components)

    def test_modes_time_component(self):
        x = [0.3, 0.2, -0.4]
        dt = {m: evolution_field(FO.h, FO.chart, x, FO.params, mode=m).components[0] for m in MODES}
        A, w = FO.params["A"], FO.params["w"]
        assert dt["evolution"] == 1.0 and dt["hamiltonian"] == 0.0
        # gradient mode carries dh/dt = A q w sin(w t)
        assert dt["gradient"] == pytest.approx(A * 0.2 * w * math.sin(w * 0.3), abs=1e-15)


class TestLagrangianReeb:
    def test_autonomous(self):
        c = HO.chart
        L = parse(HO.lagrangian, c.tangent(time=True).names)
        R = lagrangian_reeb(L, c, [0.4, 1.0, -0.3], HO.params)
        np.testing.assert_array_equal(R.components, [1.0, 0.0, 0.0])

    def test_forced_oscillator(self):
        R = lagrangian_reeb(FO.L, FO.chart, [1.2, 0.4, -0.3], FO.params)
        np.testing.assert_allclose(R.components, [1.0, 0.0, 0.0], atol=1e-15)

    def test_variable_mass(self, rng):
        kap = VM.params["kappa"]
        for _ in range(10):
            t, r, phi, vr, vphi = rng.uniform(0, 3), rng.uniform(0.5, 2), *rng.uniform(-1, 1, 3)
            R = lagrangian_reeb(VM.L, VM.chart, [t, r, phi, vr, vphi], VM.params).components
            rate = kap / (1 + kap * t)        # mdot / m
            np.testing.assert_allclose(R, [1, 0, 0, -rate * vr, -rate * vphi], atol=1e-14)

    def test_reeb_energy_identity(self, rng):
        for spec in (FO, VM):
            for _ in range(20):
                x = rng.uniform(0.5, 1.5, len(spec.layout("tangent")))
                R = lagrangian_reeb(spec.L, spec.chart, x, spec.params)
                assert abs(R.extras["reeb_energy"] + R.extras["dL_dt"]) <= 1e-10


class TestNonautonomousEL:
    def test_forced_at_origin(self):
        X = nonautonomous_el_field(FO.L, FO.chart, [0.0, 0.0, 0.0], FO.params).components
        np.testing.assert_allclose(X, [1.0, 0.0, 2.0])

    def test_variable_mass_unit_rate(self):
        P = {**VM.params, "kappa": 1.0}
        X = nonautonomous_el_field(VM.L, VM.chart, [0.0, 1.0, 0.0, 0.0, 1.0], P).components
        np.testing.assert_allclose(X, [1, 0, 1, 0, -1], atol=1e-15)

    def test_autonomous_reduction(self):
        c = HO.chart
        L = parse(HO.lagrangian, c.tangent(time=True).names)
        X = nonautonomous_el_field(L, c, [2.0, 0.3, 0.8], HO.params).components
        assert X[0] == 1.0
        np.testing.assert_allclose(X[1:], euler_lagrange_field(HO.L, c, [0.3, 0.8], HO.params).components)

    def test_energy_rate_equals_minus_dLdt(self, rng):
        for spec in (FO, VM):
            for _ in range(20):
                x = rng.uniform(0.5, 1.5, len(spec.layout("tangent")))
                lhs, rhs = energy_rate(spec.L, spec.chart, x, spec.params)
                assert lhs == pytest.approx(rhs, abs=1e-10)


def test_forced_oscillator_matches_closed_form():
    tt = np.linspace(0, 10, 201)
    traj = simulate(FO, "tangent", (0.0, 10.0), IntegratorConfig(rtol=1e-11, atol=1e-11), tt)
    P = FO.params
    ref = forced_solution(tt, 1.0, 0.0, P["m"], P["k"], P["A"], P["w"])
    assert np.max(np.abs(traj.column("q") - ref)) <= 1e-5


def test_forced_oscillator_cotangent_side_agrees():
    tt = np.linspace(0, 10, 51)
    traj = simulate(FO, "cotangent", (0.0, 10.0), IntegratorConfig(rtol=1e-11, atol=1e-11), tt)
    P = FO.params
    assert np.max(np.abs(traj.column("q") - forced_solution(tt, 1.0, 0.0, P["m"], P["k"], P["A"],
                                                            P["w"]))) <= 1e-5
