"""Mass-conservative finite element integrators for the Gross-Pitaevskii equation."""

from gpefem.assembly import Operators
from gpefem.linalg import SolverError
from gpefem.mesh import Mesh, build_interval_mesh, build_rect_mesh
from gpefem.observables import energy, eoc, eoc_slope, error_norms, mass
from gpefem.problems import (
    GradientFlowOptions,
    ProblemSpec,
    build_problem_mesh,
    ground_state,
    initial_state,
    problem_catalog,
)
from gpefem.reporting import RunReport, energy_drift, mass_drift
from gpefem.spectral import PeriodicGrid, run_spectral
from gpefem.steppers import InitMode, NewtonOptions, Scheme, run_evolution

__all__ = [
    "GradientFlowOptions",
    "InitMode",
    "Mesh",
    "NewtonOptions",
    "Operators",
    "PeriodicGrid",
    "ProblemSpec",
    "RunReport",
    "Scheme",
    "SolverError",
    "build_interval_mesh",
    "build_problem_mesh",
    "build_rect_mesh",
    "energy",
    "energy_drift",
    "eoc",
    "eoc_slope",
    "error_norms",
    "ground_state",
    "initial_state",
    "mass",
    "mass_drift",
    "problem_catalog",
    "run_evolution",
    "run_spectral",
]

__version__ = "0.1.0"
