"""Outer linearize-and-solve loop and its convergence diagnostics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import CarlemanQRError, ParameterError
from .grid import check_field, div_a_grad_matrix, gradient, norm_l2, norm_weighted
from .qr_solver import (
    SolverParams,
    assemble_initial,
    assemble_linearized,
    eliminate_cauchy,
    solve_free,
    solve_ls,
)

__all__ = [
    "IterationParams",
    "IterationRecord",
    "IterationReport",
    "IterationError",
    "run",
    "fit_theta",
    "pre_floor_window",
    "pde_residual",
]


@dataclass(frozen=True)
class IterationParams:
    """Stopping rule: ``||u_{n+1} - u_n||_{L2} <= kappa0`` or ``max_iter`` steps.

    The loop also gives up (``converged=False``) when the increment norm
    changes by less than ``stagnation_rtol`` (relative) across
    ``stagnation_window`` iterations.
    """

    kappa0: float = 1e-6
    max_iter: int = 50
    record_weighted_norms: bool = True
    stagnation_window: int = 5
    stagnation_rtol: float = 1e-3

    def __post_init__(self):
        if not self.kappa0 > 0:
            raise ParameterError(f"kappa0 must be positive, got {self.kappa0}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class IterationRecord:
    n: int
    increment_l2: Optional[float]
    residual_l2: float
    error_weighted: Optional[float]
    wall_ms: float


@dataclass
class IterationReport:
    records: list = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""
    message: str = ""

    @property
    def iterations(self):
        """Number of linearized solves performed."""
        return max(len(self.records) - 1, 0)

    @property
    def increments(self):
        return [r.increment_l2 for r in self.records[1:]]

    @property
    def errors(self):
        e = [r.error_weighted for r in self.records]
        return e if e and all(v is not None for v in e) else []

    @property
    def theta_hat(self):
        e = self.errors
        if len(e) < 3:
            return None
        return fit_theta(pre_floor_window(e))

    def to_dict(self, test=None, params=None):
        return {
            "test": test,
            "params": params,
            "iterations": [asdict(r) for r in self.records],
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "theta_hat": self.theta_hat,
        }


class IterationError(CarlemanQRError):
    """The loop aborted; ``report`` holds everything recorded so far."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def fit_theta(errors):
    """Contraction ratio ``exp(slope)`` of a least-squares line through ``log e_n``.

    >>> round(fit_theta([1.0, 0.1, 0.01]), 12)
    0.1
    """
    if isinstance(errors, IterationReport):
        errors = errors.errors
    e = np.asarray(errors, dtype=float)
    if e.size < 3:
        raise ParameterError(f"need at least 3 error values to fit theta, got {e.size}")
    if np.any(e <= 0):
        raise ParameterError("errors must be positive")
    slope = np.polyfit(np.arange(e.size), np.log(e), 1)[0]
    return float(np.exp(slope))


def pre_floor_window(errors, factor=2.0, min_points=3):
    """Leading part of an error history, up to its first entry within
    ``factor`` times the final (floor) value; padded to ``min_points``."""
    e = list(errors)
    floor = e[-1]
    stop = next((k for k, v in enumerate(e) if v <= factor * floor), len(e) - 1)
    return e[: max(stop + 1, min(min_points, len(e)))]


def pde_residual(u, spec, grid, kink_margin=3.0):
    """``-div(A grad u) + F`` at interior nodes, ``nan`` within
    ``kink_margin * delta`` of a kink of the true solution."""
    u = check_field(grid, u)
    X, Y = grid.mesh
    g = gradient(grid, u)
    L = div_a_grad_matrix(grid, spec.coefficient(grid))
    r = -(L @ u.ravel()).reshape(grid.shape) + spec.F(X, Y, u, g[..., 0], g[..., 1])
    mask = grid.interior_mask.copy()
    if spec.kink_distance is not None:
        mask &= spec.kink_distance(X, Y) > kink_margin * max(grid.dx, grid.dy)
    return np.where(mask, r, np.nan)


def _residual_norm(u, spec, grid):
    r = pde_residual(u, spec, grid)
    return float(np.sqrt(np.nansum(r**2) * grid.cell_area))


def run(spec, grid, solver=None, params=None, u0=None):
    """Compute ``u_0`` and iterate ``u_{n+1} = u_n + h_n`` until the stopping rule fires.

    Parameters
    ----------
    spec : ProblemSpec
    grid : Grid2D
    solver : SolverParams, optional
    params : IterationParams, optional
    u0 : array_like, optional
        Seed iterate; when omitted it is the minimizer of the weighted
        quasi-reversibility functional for ``div(A grad u) = 0``.

    Returns
    -------
    u : ndarray
        Last iterate, shape ``grid.shape``.
    report : IterationReport

    Raises
    ------
    IterationError
        On solver or evaluation failure, with the partial report attached.
    """
    solver = solver or SolverParams()
    params = params or IterationParams()
    spec.coefficient(grid)
    umap = eliminate_cauchy(grid)
    u_true = spec.interpolate_true(grid) if spec.true_solution is not None else None
    report = IterationReport()

    def record(n, u, inc, t0):
        err = None
        if u_true is not None and params.record_weighted_norms:
            err = norm_weighted(grid, u - u_true, solver.carleman)
        report.records.append(IterationRecord(
            n=n, increment_l2=inc, residual_l2=_residual_norm(u, spec, grid),
            error_weighted=err, wall_ms=1e3 * (time.perf_counter() - t0)))

    t0 = time.perf_counter()
    try:
        if u0 is None:
            u = solve_ls(assemble_initial(spec, grid, solver, umap), solver)
        else:
            u = check_field(grid, u0, "u0").copy()
        record(0, u, None, t0)

        for n in range(1, params.max_iter + 1):
            t0 = time.perf_counter()
            z, _ = solve_free(assemble_linearized(u, spec, grid, solver, umap), solver)
            h = umap.expand(z)
            u = check_field(grid, u + h, f"iterate {n}")
            inc = norm_l2(grid, h)
            record(n, u, inc, t0)
            if inc <= params.kappa0:
                report.converged, report.stop_reason = True, "kappa0"
                break
            w = params.stagnation_window
            incs = report.increments
            if len(incs) > w and abs(incs[-1] - incs[-1 - w]) <= params.stagnation_rtol * incs[-1 - w]:
                report.stop_reason = "stagnation"
                report.message = f"increment stalled near {inc:.3e} over {w} iterations"
                break
        else:
            report.stop_reason = "max_iter"
    except CarlemanQRError as exc:
        report.stop_reason = "error"
        report.message = str(exc)
        raise IterationError(f"{spec.label}: {exc}", report) from exc
    return u, report
