"""Benchmark reproduction: relative errors, error maps, cross sections, histories."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .grid import build_grid
from .io import write_field_csv, write_json, write_rows_csv
from .iteration import IterationError, IterationParams, run
from .problem import DEFAULT_EPSILON, BenchmarkId, catalog
from .qr_solver import SolverParams

__all__ = [
    "Target",
    "TARGETS",
    "SECTION_LINES",
    "CrossSection",
    "BenchReport",
    "relative_linf_error",
    "cross_section",
    "run_benchmark",
    "run_all",
    "write_artifacts",
    "summary",
]


@dataclass(frozen=True)
class Target:
    reported_error: float
    max_error: float
    max_iterations: Optional[int] = None
    # (threshold, fraction): at least `fraction` of nodes have pointwise error <= threshold
    pointwise: Optional[tuple] = None


TARGETS = {
    BenchmarkId.QL1: Target(1.23e-5, 1e-3, max_iterations=6),
    BenchmarkId.QL2: Target(4.19e-5, 1e-3, max_iterations=8),
    BenchmarkId.HJ1: Target(0.0533, 0.107),
    BenchmarkId.HJ2: Target(0.036, 0.072),
    BenchmarkId.HJ3: Target(0.1065, 0.213, pointwise=(0.03, 0.9)),
    BenchmarkId.HJ4: Target(0.0095, 0.02),
    BenchmarkId.HJ5: Target(0.0098, 0.02),
    BenchmarkId.HJ6: Target(0.048, 0.096),
}

# vertical line x = offset sampled for each test
SECTION_LINES = {
    BenchmarkId.QL1: 0.0,
    BenchmarkId.QL2: 0.0,
    BenchmarkId.HJ1: 0.0,
    BenchmarkId.HJ2: 0.5,
    BenchmarkId.HJ3: 0.0,
    BenchmarkId.HJ4: 0.0,
    BenchmarkId.HJ5: 0.0,
    BenchmarkId.HJ6: 0.0,
}


@dataclass
class CrossSection:
    axis: str
    requested: float
    offset: float
    index: int
    t: np.ndarray
    u_true: np.ndarray
    u_comp: np.ndarray

    @property
    def snapped(self):
        return self.offset != self.requested


def relative_linf_error(u_true, u_comp):
    """``max|u* - u| / max|u*|`` over all nodes."""
    u_true = np.asarray(u_true, dtype=float)
    return float(np.max(np.abs(u_true - u_comp)) / np.max(np.abs(u_true)))


def cross_section(grid, u_comp, u_true, x=None, y=None):
    """Samples along the grid line nearest to ``x = const`` (or ``y = const``).

    Ties go to the lower index; the coordinate actually used is recorded.
    """
    if (x is None) == (y is None):
        raise ValueError("give exactly one of x or y")
    u_comp = np.asarray(u_comp).reshape(grid.shape)
    u_true = np.asarray(u_true).reshape(grid.shape)
    if x is not None:
        i = int(np.argmin(np.abs(grid.x - x)))
        return CrossSection("x", float(x), float(grid.x[i]), i, grid.y.copy(), u_true[i, :].copy(), u_comp[i, :].copy())
    j = int(np.argmin(np.abs(grid.y - y)))
    return CrossSection("y", float(y), float(grid.y[j]), j, grid.x.copy(), u_true[:, j].copy(), u_comp[:, j].copy())


@dataclass
class BenchReport:
    test: str
    config: dict
    target: Target
    rel_linf_error: float = float("nan")
    error_field: Optional[np.ndarray] = None
    solution: Optional[np.ndarray] = None
    cross_section: Optional[CrossSection] = None
    report: Optional[object] = None
    failures: list = field(default_factory=list)
    runtime_s: float = 0.0
    grid: Optional[object] = None

    @property
    def passed(self):
        return not self.failures

    @property
    def fraction_below(self):
        """Fraction of nodes with pointwise relative error <= 3%."""
        if self.error_field is None:
            return None
        return float(np.mean(self.error_field <= 0.03))

    def summary_row(self):
        rep = self.report
        return {
            "test": self.test,
            "rel_linf_error": self.rel_linf_error,
            "reported_error": self.target.reported_error,
            "max_error": self.target.max_error,
            "fraction_below_3pct": self.fraction_below,
            "iterations": rep.iterations if rep else None,
            "converged": rep.converged if rep else False,
            "stop_reason": rep.stop_reason if rep else "error",
            "theta_hat": rep.theta_hat if rep else None,
            "passed": self.passed,
            "failures": list(self.failures),
        }


def _check(rep: BenchReport):
    t = rep.target
    if not rep.rel_linf_error <= t.max_error:
        rep.failures.append(f"relative Linf error {rep.rel_linf_error:.3e} > {t.max_error:.3e}")
    if t.max_iterations is not None:
        r = rep.report
        if not (r.converged and r.iterations <= t.max_iterations):
            rep.failures.append(f"stopping rule did not fire within {t.max_iterations} iterations")
    if t.pointwise is not None:
        thr, frac = t.pointwise
        got = float(np.mean(rep.error_field <= thr))
        if got < frac:
            rep.failures.append(f"only {got:.1%} of nodes have error <= {thr:.0%} (need {frac:.0%})")


def config_echo(n, solver, iteration, epsilon):
    return {
        "n": n,
        "lambda": solver.carleman.lam,
        "beta": solver.carleman.beta,
        "x0": list(solver.carleman.x0),
        "eta": solver.eta,
        "epsilon": epsilon,
        "kappa0": iteration.kappa0,
        "max_iter": iteration.max_iter,
        "ls_tol": solver.ls_tol,
        "method": solver.method,
    }


def run_benchmark(id, n=80, solver=None, iteration=None, epsilon=None):
    """Run one catalog test on an ``n`` by ``n`` grid of ``(-1, 1)^2``.

    Solver failures do not raise; they produce a report with a failure entry.
    """
    bid = BenchmarkId(str(getattr(id, "value", id)).lower())
    solver = solver or SolverParams()
    iteration = iteration or IterationParams()
    eps = (DEFAULT_EPSILON if epsilon is None else epsilon) if bid.is_hamilton_jacobi else None
    spec = catalog(bid, epsilon=eps)
    grid = build_grid(n)
    out = BenchReport(test=bid.value, config=config_echo(n, solver, iteration, eps),
                      target=TARGETS[bid], grid=grid)
    t0 = time.perf_counter()
    try:
        u, report = run(spec, grid, solver, iteration)
    except IterationError as exc:
        out.report = exc.report
        out.failures.append(f"solver error: {exc}")
        out.runtime_s = time.perf_counter() - t0
        return out
    out.runtime_s = time.perf_counter() - t0
    u_true = spec.interpolate_true(grid)
    out.solution = u
    out.report = report
    out.rel_linf_error = relative_linf_error(u_true, u)
    out.error_field = np.abs(u_true - u) / np.max(np.abs(u_true))
    out.cross_section = cross_section(grid, u, u_true, x=SECTION_LINES[bid])
    _check(out)
    return out


def _run_one(args):
    return run_benchmark(*args)


def run_all(ids=None, n=80, solver=None, iteration=None, epsilon=None, jobs=1):
    """Run several tests (all eight by default); returns the list of reports."""
    ids = [BenchmarkId(str(getattr(i, "value", i)).lower()) for i in (ids or list(BenchmarkId))]
    args = [(i, n, solver, iteration, epsilon) for i in ids]
    if jobs > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, args))
    return [_run_one(a) for a in args]


def summary(reports, config=None):
    """Deterministic summary (no timings) of a list of reports."""
    return {
        "config": config,
        "tests": [r.summary_row() for r in reports],
        "passed": all(r.passed for r in reports),
    }


def write_artifacts(rep, out):
    """Per-test CSV and JSON files into directory ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stem = rep.test
    if rep.solution is not None:
        write_field_csv(out / f"{stem}_solution.csv", rep.grid, rep.solution)
        write_field_csv(out / f"{stem}_error.csv", rep.grid, rep.error_field)
        cs = rep.cross_section
        write_rows_csv(out / f"{stem}_section.csv", ["t", "u_true", "u_comp"],
                       zip(cs.t.tolist(), cs.u_true.tolist(), cs.u_comp.tolist()))
    if rep.report is not None:
        write_rows_csv(out / f"{stem}_history.csv", ["n", "increment", "residual"],
                       ((r.n, r.increment_l2, r.residual_l2) for r in rep.report.records))
        write_json(out / f"{stem}_report.json", rep.report.to_dict(test=stem, params=rep.config))
