"""Simulation and verification tools for nonlocal vertical-equilibrium
two-phase flow in flat domains: a finite-volume IMEX solver for the
pseudo-parabolic model and its transport-only limit, a sine-basis
Galerkin verifier for the underlying a priori estimates, and experiment
drivers reproducing the regularization-sweep and overshoot studies.
"""

from .coefficients import CoefficientSet, DomainError, corey, linear
from .diagnostics import (
    DiagnosticsReport,
    energy,
    front_position,
    front_width,
    overshoot_max,
)
from .experiments import InitialCondition, parse_config, run_compare, run_sweep
from .grid import Grid, ScalarField
from .solver import SimConfig, StepFailure, run, step
from .velocity import VelocityField, incompressibility_residual, velocity_pair

__all__ = [
    "CoefficientSet",
    "DiagnosticsReport",
    "DomainError",
    "Grid",
    "InitialCondition",
    "ScalarField",
    "SimConfig",
    "StepFailure",
    "VelocityField",
    "corey",
    "energy",
    "front_position",
    "front_width",
    "incompressibility_residual",
    "linear",
    "overshoot_max",
    "parse_config",
    "run",
    "run_compare",
    "run_sweep",
    "step",
    "velocity_pair",
]

__version__ = "0.1.0"
