"""Carleman-weighted quasi-reversibility iteration for quasilinear elliptic
Cauchy problems, with a vanishing-viscosity route to Hamilton-Jacobi equations."""

from .bench import BenchReport, cross_section, run_all, run_benchmark
from .carleman import CarlemanParams, carleman_factor, grid_factor, weight_mu
from .errors import (
    CarlemanQRError,
    CoefficientError,
    EvaluationError,
    FieldError,
    GridError,
    LinearSolverError,
    ParameterError,
    WeightDomainError,
)
from .grid import Grid2D, build_grid, div_a_grad, div_a_grad_matrix, gradient, norm_l2, norm_weighted
from .iteration import IterationError, IterationParams, IterationReport, fit_theta, run
from .problem import BenchmarkId, ProblemSpec, catalog, eval_df, eval_f, make_viscous
from .qr_solver import (
    SolverParams,
    assemble_initial,
    assemble_linearized,
    eliminate_cauchy,
    solve_free,
    solve_ls,
)

__version__ = "0.1.0"
