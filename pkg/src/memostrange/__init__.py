"""Solver for a reaction-diffusion system with a nonlocal memory term.

Subpackages are small and flat: params holds the model constants, cell the
radial capacity problem, memory the pointwise relaxation variable, grid and
solver the finite difference machinery, verification the convergence and
comparison studies, and cli the command line front end.
"""

from .params import ModelParams, ParamError, derive_params, particle_radius, validate_params
from .grid import Field, Grid
from .cell import CellSolution, boundary_fluxes, effective_coefficient, solve_cell_radial, w_exact
from .memory import (
    MemoryState,
    convolution_reference,
    h_algebraic,
    h_from_state,
    stability_bound_check,
    step_memory,
)
from .solver import (
    CoupledState,
    SourceSpec,
    advance,
    assemble_operator,
    initial_state,
    run_simulation,
    solve_linear,
    weak_residual,
)
from .sources import manufacture_sources
from .config import ConfigError, RunConfig, load_config
from .verification import ConvergenceReport, convergence_study, kernel_equivalence_study

__all__ = [
    "ModelParams",
    "ParamError",
    "derive_params",
    "particle_radius",
    "validate_params",
    "Grid",
    "Field",
    "CellSolution",
    "w_exact",
    "solve_cell_radial",
    "boundary_fluxes",
    "effective_coefficient",
    "MemoryState",
    "h_algebraic",
    "step_memory",
    "convolution_reference",
    "h_from_state",
    "stability_bound_check",
    "CoupledState",
    "SourceSpec",
    "advance",
    "assemble_operator",
    "initial_state",
    "run_simulation",
    "solve_linear",
    "weak_residual",
    "manufacture_sources",
    "ConfigError",
    "RunConfig",
    "load_config",
    "ConvergenceReport",
    "convergence_study",
    "kernel_equivalence_study",
]
