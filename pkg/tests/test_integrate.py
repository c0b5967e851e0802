import math

import numpy as np
import pytest

from mechkit import registry
from mechkit.analysis import simulate
from mechkit.expr import VarLayout, parse
from mechkit.integrate import (
    IntegrationError, IntegratorConfig, attach_monitor, integrate, time_monitor,
)


def ho(t, x):
    return np.array([x[1], -x[0]])


class TestDopri:
    def test_harmonic_oscillator(self):
        tt = np.linspace(0, 10, 201)
        tr = integrate(ho, [1.0, 0.0], (0.0, 10.0), sample_times=tt, names=("q", "v"))
        assert np.max(np.abs(tr.column("q") - np.cos(tt))) <= 1e-8
        assert tr.metadata["steps"]["accepted"] > 0

    def test_every_step_recorded_without_samples(self):
        tr = integrate(ho, [1.0, 0.0], (0.0, 1.0))
        assert tr.times[0] == 0.0 and tr.times[-1] == 1.0
        assert np.all(np.diff(tr.times) > 0)
        assert np.max(np.abs(tr.states[:, 0] - np.cos(tr.times))) <= 1e-9

    def test_dense_output_between_steps(self):
        # loose tolerance -> few long steps, so the samples fall inside steps
        cfg = IntegratorConfig(rtol=1e-6, atol=1e-6)
        tt = np.linspace(0, 5, 1001)
        tr = integrate(ho, [1.0, 0.0], (0.0, 5.0), cfg, sample_times=tt)
        assert tr.metadata["steps"]["accepted"] < 200
        assert np.max(np.abs(tr.states[:, 0] - np.cos(tt))) <= 1e-4

    def test_zero_field(self):
        tr = integrate(lambda t, x: np.zeros(3), [1.0, 2.0, 3.0], (0.0, 4.0))
        assert np.all(tr.states == [1.0, 2.0, 3.0])

    def test_damped_oscillator_analytic(self):
        spec = registry.get("damped-oscillator")
        tt = np.linspace(0, 10, 201)
        tr = simulate(spec, "tangent", (0.0, 10.0), sample_times=tt)
        g = spec.params["gamma"]
        w = math.sqrt(1 - g * g / 4)
        ref = np.exp(-g * tt / 2) * (np.cos(w * tt) + g / (2 * w) * np.sin(w * tt))
        assert np.max(np.abs(tr.column("q") - ref)) <= 1e-5

    def test_time_dependent_rhs(self):
        tr = integrate(lambda t, x: np.array([math.cos(t)]), [0.0], (0.0, 3.0),
                       sample_times=[0.0, 1.5, 3.0])
        np.testing.assert_allclose(tr.states[:, 0], np.sin([0.0, 1.5, 3.0]), atol=1e-9)


def rk4_error(dt):
    cfg = IntegratorConfig("rk4", dt=dt)
    tr = integrate(ho, [1.0, 0.0], (0.0, 2.0), cfg)
    return abs(tr.states[-1, 0] - math.cos(2.0))


def test_rk4_fourth_order():
    errs = [rk4_error(dt) for dt in (0.1, 0.05, 0.025)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    for p in orders:
        assert 3.8 <= p <= 4.2


def test_rk4_final_step_lands_on_endpoint():
    tr = integrate(ho, [1.0, 0.0], (0.0, 1.0), IntegratorConfig("rk4", dt=0.3))
    assert tr.times[-1] == 1.0


class TestMonitors:
    def test_energy_channel_flat(self):
        lay = VarLayout(["q", "v"])
        mon = attach_monitor("energy", parse("0.5*(v^2 + q^2)", lay.names), lay)
        tr = integrate(ho, [1.0, 0.0], (0.0, 10.0), monitors=[mon], names=lay.names)
        E = tr.monitors["energy"]
        assert np.max(np.abs(E - E[0])) <= 1e-9

    def test_time_channel(self):
        tt = np.linspace(0, 2, 9)
        tr = integrate(ho, [1.0, 0.0], (0.0, 2.0), sample_times=tt, monitors=[time_monitor()])
        np.testing.assert_array_equal(tr.monitors["time"], tt)

    def test_callable_channel(self):
        tr = integrate(ho, [1.0, 0.0], (0.0, 1.0), monitors=[attach_monitor("q2", lambda t, x: x[0] ** 2)])
        np.testing.assert_allclose(tr.monitors["q2"], tr.states[:, 0] ** 2)

    def test_expression_channel_needs_layout(self):
        with pytest.raises(ValueError):
            attach_monitor("bad", parse("q"))


class TestErrors:
    def test_reversed_span(self):
        with pytest.raises(ValueError):
            integrate(ho, [1.0, 0.0], (1.0, 0.0))

    def test_bad_samples(self):
        with pytest.raises(ValueError):
            integrate(ho, [1.0, 0.0], (0.0, 1.0), sample_times=[0.5, 0.2])
        with pytest.raises(ValueError):
            integrate(ho, [1.0, 0.0], (0.0, 1.0), sample_times=[0.0, 2.0])

    def test_rk4_needs_dt(self):
        with pytest.raises(ValueError):
            IntegratorConfig("rk4")

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            IntegratorConfig("euler")

    def test_blow_up(self):
        # x' = x^2 from x(0) = 1 reaches infinity at t = 1
        with pytest.raises(IntegrationError) as info:
            integrate(lambda t, x: x * x, [1.0], (0.0, 2.0))
        assert 0.9 < info.value.time <= 1.0 + 1e-6

    def test_non_finite_rhs(self):
        with pytest.raises(IntegrationError):
            integrate(lambda t, x: np.array([np.nan]), [1.0], (0.0, 1.0))

    def test_step_budget(self):
        with pytest.raises(IntegrationError):
            integrate(ho, [1.0, 0.0], (0.0, 100.0), IntegratorConfig(max_steps=10))
