"""``carleman-qr`` command line: ``list``, ``solve`` and ``bench``.

Exit codes
----------
0  success
1  ``bench`` finished but at least one test missed its acceptance target
2  usage error (unknown flag, out-of-range value, unreadable config file)
3  solver error, or a malformed ``--problem`` file
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import bench
from .carleman import CarlemanParams
from .errors import CarlemanQRError
from .grid import build_grid
from .io import write_field_csv, write_json, write_rows_csv
from .iteration import IterationError, IterationParams, run
from .problem import DEFAULT_EPSILON, BenchmarkId, catalog, constant_matrix

__all__ = ["RunConfig", "UsageError", "ProblemFileError", "parse_config", "load_problem", "main"]

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ProblemFileError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of one invocation; serialized as ``config.json``."""

    command: str = "list"
    test: Optional[str] = None
    problem: Optional[str] = None
    n: int = 80
    lam: float = 4.0
    beta: float = 10.0
    x0: tuple = (-4.0, 0.0)
    eta: float = 1e-4
    epsilon: float = DEFAULT_EPSILON
    kappa0: float = 1e-6
    max_iter: int = 50
    ls_tol: float = 1e-10
    method: str = "auto"
    jobs: int = 1
    out: str = "carleman_out"

    def validate(self):
        if self.command not in ("list", "solve", "bench"):
            raise UsageError(f"unknown command {self.command!r}")
        if self.command == "bench":
            if self.test is None:
                raise UsageError("bench needs a test id or 'all'")
            if self.test != "all" and self.test not in _IDS:
                raise UsageError(f"unknown test {self.test!r}; choose from {', '.join(_IDS)} or all")
        if self.command == "solve":
            if (self.test is None) == (self.problem is None):
                raise UsageError("solve needs exactly one of a test id or --problem FILE")
            if self.test is not None and self.test not in _IDS:
                raise UsageError(f"unknown test {self.test!r}; choose from {', '.join(_IDS)}")
        if not (isinstance(self.n, int) and self.n >= 7):
            raise UsageError(f"--n must be an integer >= 7, got {self.n!r}")
        for name in ("beta", "lam"):
            if not getattr(self, name) >= 0:
                raise UsageError(f"--{_FLAG[name]} must be >= 0, got {getattr(self, name)!r}")
        for name in ("eta", "epsilon", "kappa0"):
            if not getattr(self, name) > 0:
                raise UsageError(f"--{_FLAG[name]} must be positive, got {getattr(self, name)!r}")
        if not 0 < self.ls_tol < 1:
            raise UsageError(f"--ls-tol must lie in (0, 1), got {self.ls_tol!r}")
        if not (isinstance(self.max_iter, int) and self.max_iter >= 1):
            raise UsageError(f"--max-iter must be an integer >= 1, got {self.max_iter!r}")
        if not (isinstance(self.jobs, int) and self.jobs >= 1):
            raise UsageError(f"--jobs must be an integer >= 1, got {self.jobs!r}")
        if self.method not in ("auto", "direct", "iterative"):
            raise UsageError(f"--method must be direct, iterative or auto, got {self.method!r}")
        if len(self.x0) != 2 or np.hypot(max(abs(self.x0[0]) - 1, 0), max(abs(self.x0[1]) - 1, 0)) <= 1:
            raise UsageError(f"--x0 must be at distance > 1 from the square, got {self.x0!r}")
        return self

    def solver_params(self):
        from .qr_solver import SolverParams

        return SolverParams(carleman=CarlemanParams(self.x0, self.beta, self.lam), eta=self.eta,
                            ls_tol=self.ls_tol, method=self.method)

    def iteration_params(self):
        return IterationParams(kappa0=self.kappa0, max_iter=self.max_iter)

    def to_dict(self):
        d = asdict(self)
        d["x0"] = list(self.x0)
        return d

    @classmethod
    def from_dict(cls, d, source="config"):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise UsageError(f"{source}: unknown key(s) {', '.join(unknown)}")
        d = dict(d)
        if "x0" in d:
            d["x0"] = tuple(d["x0"])
        return cls(**d)


_IDS = [b.value for b in BenchmarkId]
_FLAG = {"lam": "lambda", "max_iter": "max-iter", "ls_tol": "ls-tol"}
_FLAG.update({k: k for k in ("n", "beta", "eta", "epsilon", "kappa0", "jobs", "method", "out", "x0")})


def _point(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    return (a, b)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="carleman-qr",
                description="Carleman-weighted quasi-reversibility solver for elliptic Cauchy problems.")
    S = argparse.SUPPRESS
    p.add_argument("command", choices=["list", "solve", "bench"])
    p.add_argument("test", nargs="?", default=S, help="catalog id (ql1, ql2, hj1..hj6) or 'all' for bench")
    p.add_argument("--n", type=int, default=S, help="nodes per axis (default 80)")
    p.add_argument("--lambda", dest="lam", type=float, default=S, help="Carleman parameter (default 4)")
    p.add_argument("--beta", type=float, default=S, help="weight exponent (default 10)")
    p.add_argument("--x0", type=_point, default=S, help="weight pole as X,Y (default -4,0)")
    p.add_argument("--eta", type=float, default=S, help="regularization (default 1e-4)")
    p.add_argument("--epsilon", type=float, default=S, help="viscosity for hj tests (default 1e-3)")
    p.add_argument("--kappa0", type=float, default=S, help="stopping tolerance (default 1e-6)")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    p.add_argument("--ls-tol", dest="ls_tol", type=float, default=S)
    p.add_argument("--method", choices=["auto", "direct", "iterative"], default=S)
    p.add_argument("--jobs", type=int, default=S, help="parallel tests for 'bench all' (default 1)")
    p.add_argument("--out", default=S, help="artifact directory")
    p.add_argument("--config", default=None, help="JSON file of defaults; flags override it")
    p.add_argument("--problem", default=S, help="JSON problem file for solve")
    return p


def parse_config(argv):
    """Defaults, then ``--config`` file values, then explicit flags."""
    argv = list(argv)
    # "--x0 -4,0" would otherwise be read as an unknown option
    for k in range(len(argv) - 1):
        if argv[k] == "--x0" and argv[k + 1].startswith("-"):
            argv[k : k + 2] = [f"--x0={argv[k + 1]}", ""]
    ns = vars(build_parser().parse_args([a for a in argv if a != ""]))
    cfg_path = ns.pop("config")
    base = RunConfig()
    if cfg_path is not None:
        try:
            data = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"{cfg_path}: expected a JSON object")
        data.pop("command", None)
        try:
            base = RunConfig.from_dict({**base.to_dict(), **data, "command": base.command}, cfg_path)
        except TypeError as exc:
            raise UsageError(f"{cfg_path}: {exc}") from None
    if ns.get("test") is not None:
        ns["test"] = ns["test"].lower()
    if "problem" in ns:
        ns.setdefault("test", None)
    elif "test" in ns:
        ns["problem"] = None
    return replace(base, **ns).validate()


# --- user problem files -----------------------------------------------------

_PROBLEM_KEYS = {"base", "a", "epsilon", "scale", "label"}


def load_problem(path, default_epsilon=DEFAULT_EPSILON):
    """Build a :class:`ProblemSpec` from a JSON problem file.

    The file is one object with ``base`` (a catalog id) and optional ``a``
    (constant 2x2 diffusion matrix), ``epsilon`` (viscosity of an hj base),
    ``scale`` (positive factor on the nonlinearity) and ``label``. Changing
    ``a`` or ``scale`` drops the known exact solution.

    Raises
    ------
    ProblemFileError
        With the file name and the offending key or JSON position.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ProblemFileError(f"{path}: top level must be a JSON object")
    unknown = sorted(set(data) - _PROBLEM_KEYS)
    if unknown:
        raise ProblemFileError(f"{path}: unknown key {unknown[0]!r}")
    if "base" not in data:
        raise ProblemFileError(f"{path}: missing key 'base'")
    base = data["base"]
    if not isinstance(base, str) or base.lower() not in _IDS:
        raise ProblemFileError(f"{path}: key 'base': expected one of {', '.join(_IDS)}, got {base!r}")
    bid = BenchmarkId(base.lower())

    eps = data.get("epsilon", default_epsilon)
    if "epsilon" in data and not bid.is_hamilton_jacobi:
        raise ProblemFileError(f"{path}: key 'epsilon' only applies to hj problems")
    if not _positive_number(eps):
        raise ProblemFileError(f"{path}: key 'epsilon': expected a positive number, got {eps!r}")
    try:
        spec = catalog(bid, epsilon=eps)
    except CarlemanQRError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None

    changes = {}
    if "a" in data:
        a = data["a"]
        if not (isinstance(a, list) and len(a) == 2):
            raise ProblemFileError(f"{path}: key 'a': expected a 2x2 list of numbers")
        for i, row in enumerate(a):
            if not (isinstance(row, list) and len(row) == 2):
                raise ProblemFileError(f"{path}: key 'a'[{i}]: expected a row of 2 numbers")
            for j, v in enumerate(row):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ProblemFileError(f"{path}: key 'a'[{i}][{j}]: expected a number, got {v!r}")
        m = np.array(a, dtype=float)
        if m[0, 1] != m[1, 0]:
            raise ProblemFileError(f"{path}: key 'a': matrix must be symmetric")
        if np.linalg.eigvalsh(m).min() <= 0:
            raise ProblemFileError(f"{path}: key 'a': matrix must be positive definite")
        changes["a_field"] = constant_matrix(m)
    if "scale" in data:
        c = data["scale"]
        if not _positive_number(c):
            raise ProblemFileError(f"{path}: key 'scale': expected a positive number, got {c!r}")
        c = float(c)
        F, ds, dp = spec.nonlinearity, spec.d_s, spec.d_p
        changes["nonlinearity"] = lambda x, y, s, px, py: c * F(x, y, s, px, py)
        changes["d_s"] = lambda x, y, s, px, py: c * ds(x, y, s, px, py)
        changes["d_p"] = lambda x, y, s, px, py: tuple(c * v for v in dp(x, y, s, px, py))
    if changes:
        changes["true_solution"] = None
    label = data.get("label", spec.label if not changes else f"{spec.label}-custom")
    if not isinstance(label, str):
        raise ProblemFileError(f"{path}: key 'label': expected a string")
    changes["label"] = label
    return replace(spec, **changes)


def _positive_number(v):
    return not isinstance(v, bool) and isinstance(v, (int, float)) and v > 0


# --- commands ---------------------------------------------------------------


def _cmd_list(cfg, out):
    for b in BenchmarkId:
        print(f"{b.value:4s}  {catalog(b).description}", file=out)
    return EXIT_OK


def _cmd_solve(cfg, out):
    if cfg.problem is not None:
        try:
            spec = load_problem(cfg.problem, cfg.epsilon)
        except ProblemFileError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    else:
        spec = catalog(cfg.test, epsilon=cfg.epsilon)
    grid = build_grid(cfg.n)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(outdir / "config.json", cfg.to_dict())
    try:
        u, report = run(spec, grid, cfg.solver_params(), cfg.iteration_params())
    except IterationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        write_json(outdir / f"{spec.label}_report.json", exc.report.to_dict(spec.label, cfg.to_dict()))
        return EXIT_SOLVER
    stem = spec.label
    write_field_csv(outdir / f"{stem}_solution.csv", grid, u)
    write_rows_csv(outdir / f"{stem}_history.csv", ["n", "increment", "residual"],
                   ((r.n, r.increment_l2, r.residual_l2) for r in report.records))
    write_json(outdir / f"{stem}_report.json", report.to_dict(stem, cfg.to_dict()))
    line = f"{stem}: {report.iterations} iterations, stop={report.stop_reason}"
    if spec.true_solution is not None:
        u_true = spec.interpolate_true(grid)
        write_field_csv(outdir / f"{stem}_error.csv", grid, np.abs(u_true - u) / np.max(np.abs(u_true)))
        line += f", rel Linf error {bench.relative_linf_error(u_true, u):.3e}"
    print(line, file=out)
    return EXIT_OK


def _cmd_bench(cfg, out):
    ids = list(BenchmarkId) if cfg.test == "all" else [BenchmarkId(cfg.test)]
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(outdir / "config.json", cfg.to_dict())
    reports = bench.run_all(ids, n=cfg.n, solver=cfg.solver_params(), iteration=cfg.iteration_params(),
                            epsilon=cfg.epsilon, jobs=cfg.jobs)
    for r in reports:
        bench.write_artifacts(r, outdir)
        status = "PASS" if r.passed else "FAIL"
        it = r.report.iterations if r.report else "-"
        print(f"{status} {r.test}: rel Linf error {r.rel_linf_error:.3e} (target {r.target.max_error:.3g}, "
              f"reported {r.target.reported_error:.3g}), {it} iterations, {r.runtime_s:.1f} s", file=out)
        for msg in r.failures:
            print(f"     {msg}", file=out)
    write_json(outdir / "summary.json", bench.summary(reports, cfg.to_dict()))
    if any(r.failures and r.failures[0].startswith("solver error") for r in reports):
        return EXIT_SOLVER
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return {"list": _cmd_list, "solve": _cmd_solve, "bench": _cmd_bench}[cfg.command](cfg, out)
    except CarlemanQRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
