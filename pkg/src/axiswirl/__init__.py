"""Numerical laboratory for axisymmetric inhomogeneous Navier-Stokes flow with swirl."""

from .errors import (AxiswirlError, ConfigurationError, ContractViolation, DataError,
                     DomainError, SolverError, StepRejected)
from .grid import Grid, hardy_weighted_norm, lp_norm, make_grid
from .fields import (ScalarField, State, apply_axis_parity, builtin_scenarios,
                     from_stream_function, make_state, read_checkpoint, rest_state,
                     sample, scenario_state, write_checkpoint)
from .solver import Stepper, kinetic_energy, step
from .vorticity import identity_residuals, vorticity_pack
from .analysis import decay_fit, smallness_report

__version__ = "0.1.0"

__all__ = [
    "AxiswirlError", "ConfigurationError", "ContractViolation", "DataError", "DomainError",
    "SolverError", "StepRejected", "Grid", "hardy_weighted_norm", "lp_norm", "make_grid",
    "ScalarField", "State", "apply_axis_parity", "builtin_scenarios", "from_stream_function",
    "make_state", "read_checkpoint", "rest_state", "sample", "scenario_state",
    "write_checkpoint", "Stepper", "kinetic_energy", "step", "identity_residuals",
    "vorticity_pack", "decay_fit", "smallness_report",
]
