"""CSV and JSON serialization of fields and reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import FieldError
from .grid import Grid2D, check_field

__all__ = ["write_field_csv", "read_field_csv", "write_rows_csv", "write_json"]


def _fmt(v):
    return repr(float(v))


def write_field_csv(path, grid, u):
    """Write ``x,y,value`` rows in row-major node order with round-trip precision."""
    u = check_field(grid, u)
    X, Y = grid.mesh
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for x, y, v in zip(X.ravel(), Y.ravel(), u.ravel()):
            w.writerow([_fmt(x), _fmt(y), _fmt(v)])


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`; returns ``(grid, u)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs, ys = np.unique(data[:, 0]), np.unique(data[:, 1])
    if xs.size * ys.size != data.shape[0]:
        raise FieldError(f"{path}: rows do not form a tensor grid")
    grid = Grid2D(xs.size, ys.size, xs[0], xs[-1], ys[0], ys[-1])
    return grid, data[:, 2].reshape(grid.shape)


def write_rows_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (_fmt(v) if isinstance(v, float) else v) for v in r])


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")
