"""Numerical solver for multi-species BPS vortices on a torus and in the plane."""
from .coupling import (
    CholeskyFactors,
    CouplingMatrix,
    CouplingParams,
    ExistenceReport,
    VortexCounts,
    build_matrix,
    check_existence,
    cholesky,
    compute_p,
    compute_q,
    critical_area,
    eigenvalues,
    inverse_closed_form,
)
from .grid import Grid
from .observables import Observables, compute_observables
from .plane import DecayFit, PlaneProblem, build_plane_problem, fit_decay, minimize_plane
from .sources import VortexSpec
from .torus import SolveOptions, SolveReport, TorusProblem, build_torus_problem, minimize

__version__ = "0.1.0"
