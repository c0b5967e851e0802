"""
mechkit: derive, integrate and check dynamical vector fields of
conservative, time-dependent and dissipative mechanical systems.
"""
from .expr import parse, evaluate, to_string, VarLayout
from .phase import Chart, SingularLagrangian, OffConstraint
from .integrate import IntegratorConfig, integrate
from .system import SystemSpec, load
from . import registry

__all__ = [
    "parse", "evaluate", "to_string", "VarLayout", "Chart", "SingularLagrangian",
    "OffConstraint", "IntegratorConfig", "integrate", "SystemSpec", "load", "registry",
]
__version__ = "0.1.0"
