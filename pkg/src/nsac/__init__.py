"""One-dimensional compressible Navier-Stokes-Allen-Cahn simulator with a
van der Waals pressure law."""

from nsac._backend import BACKEND
from nsac.config import ConfigError, SimConfig, parse_config
from nsac.diagnostics import EnergyLedger, energy_budget, ledger
from nsac.eos import PhysParams, critical_points, phi, pressure, pressure_derivative
from nsac.grid import (
    BCMode,
    FieldState,
    Grid,
    SeededRandom,
    SinePerturb,
    TanhInterface,
    Uniform,
    make_initial,
)
from nsac.solver_euler import BlowUpError, StepControl, simulate, step
from nsac.solver_lagrange import simulate_lagrange, to_euler, to_lagrange

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BCMode",
    "BlowUpError",
    "ConfigError",
    "EnergyLedger",
    "FieldState",
    "Grid",
    "PhysParams",
    "SeededRandom",
    "SimConfig",
    "SinePerturb",
    "StepControl",
    "TanhInterface",
    "Uniform",
    "critical_points",
    "energy_budget",
    "ledger",
    "make_initial",
    "parse_config",
    "phi",
    "pressure",
    "pressure_derivative",
    "simulate",
    "simulate_lagrange",
    "step",
    "to_euler",
    "to_lagrange",
]
