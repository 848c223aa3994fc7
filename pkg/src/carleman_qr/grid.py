"""Uniform tensor grids on a rectangle and the finite-difference operators on them.

A field is a plain ``ndarray`` of shape ``(nx, ny)`` indexed ``u[i, j]`` with
``x_i = x_min + i*dx`` and ``y_j = y_min + j*dy`` (``indexing="ij"``).  Flat
(row-major) node indices are ``k = i*ny + j``.

All differential operators are available both as functions acting on fields
and as cached sparse matrices on the grid (``grid.dx_op`` etc.) acting on
flattened fields; the functions are thin wrappers over the matrices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import CoefficientError, FieldError, GridError

__all__ = [
    "NodeKind",
    "Grid2D",
    "build_grid",
    "check_field",
    "gradient",
    "div_a_grad",
    "div_a_grad_matrix",
    "laplacian",
    "norm_l2",
    "norm_weighted",
    "norm_h2_discrete",
    "normal_derivative",
]


class NodeKind(enum.IntEnum):
    INTERIOR = 0
    LEFT = 1
    RIGHT = 2
    BOTTOM = 3
    TOP = 4
    CORNER = 5


def _first_diff_1d(n, h):
    """Second-order first derivative: central inside, 3-point one-sided at the ends."""
    rows, cols, vals = [], [], []
    for i in range(1, n - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5 / h, 0.5 / h]
    rows += [0, 0, 0, n - 1, n - 1, n - 1]
    cols += [0, 1, 2, n - 1, n - 2, n - 3]
    vals += [-1.5 / h, 2.0 / h, -0.5 / h, 1.5 / h, -2.0 / h, 0.5 / h]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _central_1d(n, h, second=False):
    """Central first or second difference with zero rows at both ends."""
    i = np.arange(1, n - 1)
    if second:
        rows = np.concatenate([i, i, i])
        cols = np.concatenate([i - 1, i, i + 1])
        vals = np.concatenate([np.full(n - 2, 1.0), np.full(n - 2, -2.0), np.full(n - 2, 1.0)]) / h**2
    else:
        rows = np.concatenate([i, i])
        cols = np.concatenate([i - 1, i + 1])
        vals = np.concatenate([np.full(n - 2, -0.5), np.full(n - 2, 0.5)]) / h
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class Grid2D:
    """Uniform ``nx`` by ``ny`` node grid on ``[x_min, x_max] x [y_min, y_max]``."""

    nx: int
    ny: int
    x_min: float = -1.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 1.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise GridError(f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise GridError("degenerate bounds")

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def size(self):
        return self.nx * self.ny

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self):
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def delta(self):
        """Grid spacing along x (equal to ``dy`` on square cells)."""
        return self.dx

    @property
    def cell_area(self):
        return self.dx * self.dy

    @property
    def bounds(self):
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @cached_property
    def x(self):
        return self.x_min + self.dx * np.arange(self.nx)

    @cached_property
    def y(self):
        return self.y_min + self.dy * np.arange(self.ny)

    @cached_property
    def mesh(self):
        """Node coordinates ``(X, Y)``, each of shape ``(nx, ny)``."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def kind(self):
        """``NodeKind`` code of every node."""
        k = np.full(self.shape, NodeKind.INTERIOR, dtype=np.int8)
        k[0, :] = NodeKind.LEFT
        k[-1, :] = NodeKind.RIGHT
        k[:, 0] = NodeKind.BOTTOM
        k[:, -1] = NodeKind.TOP
        k[[0, 0, -1, -1], [0, -1, 0, -1]] = NodeKind.CORNER
        return k

    @cached_property
    def interior_mask(self):
        return self.kind == NodeKind.INTERIOR

    @cached_property
    def interior_indices(self):
        return np.flatnonzero(self.interior_mask)

    @cached_property
    def boundary_indices(self):
        """Flat indices of all boundary nodes (corners included), ascending."""
        return np.flatnonzero(~self.interior_mask)

    @cached_property
    def boundary_normals(self):
        """Outward normal per boundary node; corners get the average of both sides."""
        n = np.zeros(self.shape + (2,))
        n[0, :, 0] -= 1.0
        n[-1, :, 0] += 1.0
        n[:, 0, 1] -= 1.0
        n[:, -1, 1] += 1.0
        n[[0, 0, -1, -1], [0, -1, 0, -1]] *= 0.5
        return n.reshape(-1, 2)[self.boundary_indices]

    def flat_index(self, i, j):
        return np.asarray(i) * self.ny + np.asarray(j)

    # --- sparse operators on flattened fields -------------------------------

    @cached_property
    def dx_op(self):
        return sp.kron(_first_diff_1d(self.nx, self.dx), sp.identity(self.ny), format="csr")

    @cached_property
    def dy_op(self):
        return sp.kron(sp.identity(self.nx), _first_diff_1d(self.ny, self.dy), format="csr")

    @cached_property
    def _interior_rows(self):
        return sp.diags(self.interior_mask.ravel().astype(float))

    @cached_property
    def dxx_op(self):
        m = sp.kron(_central_1d(self.nx, self.dx, second=True), sp.identity(self.ny))
        return (self._interior_rows @ m).tocsr()

    @cached_property
    def dyy_op(self):
        m = sp.kron(sp.identity(self.nx), _central_1d(self.ny, self.dy, second=True))
        return (self._interior_rows @ m).tocsr()

    @cached_property
    def dxy_op(self):
        m = sp.kron(_central_1d(self.nx, self.dx), _central_1d(self.ny, self.dy))
        return (self._interior_rows @ m).tocsr()

    @cached_property
    def h2_ops(self):
        """Operators whose squared outputs make up the discrete H^2 norm."""
        return (
            sp.identity(self.size, format="csr"),
            self.dx_op,
            self.dy_op,
            self.dxx_op,
            self.dxy_op,
            self.dyy_op,
        )


def build_grid(n, bounds=(-1.0, 1.0, -1.0, 1.0)):
    """Square ``n`` by ``n`` grid on ``bounds = (x_min, x_max, y_min, y_max)``.

    >>> build_grid(80).delta == 2 / 79
    True
    """
    n = int(n)
    if n < 3:
        raise GridError(f"n must be >= 3, got {n}")
    return Grid2D(n, n, *map(float, bounds))


def check_field(grid, u, name="field"):
    u = np.asarray(u, dtype=float)
    if u.size != grid.size:
        raise FieldError(f"{name} has {u.size} values, grid has {grid.size} nodes")
    u = u.reshape(grid.shape)
    if not np.all(np.isfinite(u)):
        bad = np.argwhere(~np.isfinite(u))[0]
        raise FieldError(f"{name} is not finite at node {tuple(int(v) for v in bad)}")
    return u


def gradient(grid, u):
    """Second-order gradient at every node, shape ``(nx, ny, 2)``."""
    u = check_field(grid, u).ravel()
    g = np.stack([grid.dx_op @ u, grid.dy_op @ u], axis=-1)
    return g.reshape(grid.shape + (2,))


def _coefficient_arrays(grid, a):
    a = np.asarray(a, dtype=float)
    if a.shape == (2, 2):
        a = np.broadcast_to(a, grid.shape + (2, 2))
    elif a.shape != grid.shape + (2, 2):
        raise CoefficientError(f"coefficient must have shape (2, 2) or {grid.shape + (2, 2)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise CoefficientError("coefficient is not finite")
    if not np.allclose(a[..., 0, 1], a[..., 1, 0], rtol=1e-12, atol=1e-14):
        raise CoefficientError("coefficient matrix is not symmetric")
    a11, a12, a22 = a[..., 0, 0], a[..., 0, 1], a[..., 1, 1]
    if np.any(a11 <= 0) or np.any(a11 * a22 - a12**2 <= 0):
        bad = np.argwhere((a11 <= 0) | (a11 * a22 - a12**2 <= 0))[0]
        raise CoefficientError(f"coefficient is not positive definite at node {tuple(int(v) for v in bad)}")
    return a11, a12, a22


def div_a_grad_matrix(grid, a):
    """Sparse matrix of ``u -> div(A grad u)`` with zero rows at boundary nodes.

    Uses the flux form with midpoint-averaged ``a11``/``a22`` and central
    differences of ``a12 u_y`` and ``a12 u_x`` for the cross terms.  For a
    constant ``A`` this is exactly ``a11 u_xx + 2 a12 u_xy + a22 u_yy`` with the
    5-point and 4-corner stencils.
    """
    a11, a12, a22 = _coefficient_arrays(grid, a)
    hx2, hy2, hxy = grid.dx**2, grid.dy**2, 4.0 * grid.dx * grid.dy
    I, J = np.nonzero(grid.interior_mask)
    k = grid.flat_index(I, J)
    ax_p = 0.5 * (a11[I, J] + a11[I + 1, J]) / hx2
    ax_m = 0.5 * (a11[I, J] + a11[I - 1, J]) / hx2
    ay_p = 0.5 * (a22[I, J] + a22[I, J + 1]) / hy2
    ay_m = 0.5 * (a22[I, J] + a22[I, J - 1]) / hy2
    ce, cw = a12[I + 1, J] / hxy, a12[I - 1, J] / hxy
    cn, cs = a12[I, J + 1] / hxy, a12[I, J - 1] / hxy

    f = grid.flat_index
    entries = [
        (f(I + 1, J), ax_p),
        (f(I - 1, J), ax_m),
        (f(I, J + 1), ay_p),
        (f(I, J - 1), ay_m),
        (k, -(ax_p + ax_m + ay_p + ay_m)),
        (f(I + 1, J + 1), ce + cn),
        (f(I + 1, J - 1), -ce - cs),
        (f(I - 1, J + 1), -cw - cn),
        (f(I - 1, J - 1), cw + cs),
    ]
    rows = np.concatenate([k] * len(entries))
    cols = np.concatenate([c for c, _ in entries])
    vals = np.concatenate([v for _, v in entries])
    return sp.csr_matrix((vals, (rows, cols)), shape=(grid.size, grid.size))


def div_a_grad(grid, u, a):
    """``div(A grad u)`` at interior nodes, zero at boundary nodes."""
    u = check_field(grid, u)
    return (div_a_grad_matrix(grid, a) @ u.ravel()).reshape(grid.shape)


def laplacian(grid, u):
    u = check_field(grid, u).ravel()
    return ((grid.dxx_op + grid.dyy_op) @ u).reshape(grid.shape)


def norm_l2(grid, u):
    """Node-sum quadrature of the L^2 norm over the rectangle."""
    u = check_field(grid, u)
    return float(np.sqrt(np.sum(u**2) * grid.cell_area))


def norm_weighted(grid, u, cp):
    """Carleman-weighted H^1 norm ``[sum e^{2 lam mu} (u^2 + |grad u|^2) dA]^{1/2}``."""
    from .carleman import grid_factor

    u = check_field(grid, u)
    w = grid_factor(grid, cp)
    g = gradient(grid, u)
    return float(np.sqrt(np.sum(w * (u**2 + np.sum(g**2, axis=-1))) * grid.cell_area))


def norm_h2_discrete(grid, u):
    """Discrete H^2 norm: value, both first differences (all nodes) and the
    three second differences ``u_xx, u_xy, u_yy`` (interior nodes)."""
    u = check_field(grid, u).ravel()
    total = sum(float(np.sum((op @ u) ** 2)) for op in grid.h2_ops)
    return float(np.sqrt(total * grid.cell_area))


def normal_derivative(grid, u):
    """Outward normal derivative at ``grid.boundary_indices``.

    One-sided 3-point differences along each side; corners average the two
    adjacent side values.
    """
    u = check_field(grid, u)
    hx, hy = grid.dx, grid.dy
    left = (3 * u[0, :] - 4 * u[1, :] + u[2, :]) / (2 * hx)
    right = (3 * u[-1, :] - 4 * u[-2, :] + u[-3, :]) / (2 * hx)
    bottom = (3 * u[:, 0] - 4 * u[:, 1] + u[:, 2]) / (2 * hy)
    top = (3 * u[:, -1] - 4 * u[:, -2] + u[:, -3]) / (2 * hy)

    d = np.zeros(grid.shape)
    d[0, :] += left
    d[-1, :] += right
    d[:, 0] += bottom
    d[:, -1] += top
    d[[0, 0, -1, -1], [0, -1, 0, -1]] *= 0.5
    return d.ravel()[grid.boundary_indices]
