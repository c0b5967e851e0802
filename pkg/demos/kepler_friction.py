"""Kepler orbit with linear friction, integrated on three sides.

Runs the contact Kepler system in Hamiltonian, Lagrangian and unified form,
compares the radial trajectories and fits the decay rate of the angular
momentum, which should equal the friction coefficient.

    python3 demos/kepler_friction.py
"""
import numpy as np

from mechkit import registry
from mechkit.analysis import fitted_rate, simulate
from mechkit.integrate import IntegratorConfig

spec = registry.get("kepler-friction")
tt = np.linspace(*spec.t_span, 101)
cfg = IntegratorConfig(rtol=1e-10, atol=1e-10)

runs = {side: simulate(spec, side, config=cfg, sample_times=tt)
        for side in ("cotangent", "tangent", "unified")}

ref = runs["tangent"].column("r")
for side, traj in runs.items():
    print(f"{side:10s} max |r - r_tangent| = {np.max(np.abs(traj.column('r') - ref)):.3e}")

ell = runs["tangent"].column("angular_momentum")
print(f"fitted decay rate of m r^2 vphi: {fitted_rate(tt, ell):.10f} "
      f"(gamma = {spec.params['gamma']})")
if "constraint" in runs["unified"].monitors:
    print(f"unified constraint drift: {np.max(runs['unified'].monitors['constraint']):.3e}")
