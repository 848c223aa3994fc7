"""Carleman-weighted quasi-reversibility least-squares systems.

Both functionals are discretized as weighted linear least squares over the
*free* unknowns left after the Cauchy data are eliminated:

* the boundary ring is fixed to the Dirichlet data;
* the first interior ring is tied to the second through the one-sided
  Neumann stencil ``(3 u_b - 4 u_1 + u_2) / (2 h) = g``, i.e.
  ``u_1 = (3 u_b + u_2 - 2 h g) / 4``; ring corners average both relations.

A full field is recovered as ``u = P z + q`` with ``P`` sparse and ``q`` the
data offset (zero for the homogeneous space of increments).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.io import mmwrite

from .carleman import CarlemanParams, grid_factor
from .errors import EvaluationError, GridError, LinearSolverError, ParameterError
from .grid import check_field, div_a_grad_matrix

__all__ = [
    "SolverParams",
    "UnknownMap",
    "WeightedLeastSquares",
    "eliminate_cauchy",
    "assemble_linearized",
    "assemble_initial",
    "solve_free",
    "solve_ls",
    "normal_residual",
    "dump_system",
]


@dataclass(frozen=True)
class SolverParams:
    """Carleman weight, regularization and linear-solver settings.

    ``method`` is ``"direct"`` (sparse factorization of the normal equations),
    ``"iterative"`` (conjugate gradients on the normal equations) or
    ``"auto"`` (direct up to 100 nodes per axis).
    """

    carleman: CarlemanParams = field(default_factory=CarlemanParams)
    eta: float = 1e-4
    ls_tol: float = 1e-10
    ls_max_iter: int = 10_000
    method: str = "auto"
    initial_doubling: bool = False

    def __post_init__(self):
        if not self.eta >= 0:
            raise ParameterError(f"eta must be >= 0, got {self.eta}")
        if not 0 < self.ls_tol < 1:
            raise ParameterError(f"ls_tol must be in (0, 1), got {self.ls_tol}")
        if self.ls_max_iter < 1:
            raise ParameterError("ls_max_iter must be >= 1")
        if self.method not in ("auto", "direct", "iterative"):
            raise ParameterError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class UnknownMap:
    """Affine parametrization of fields with prescribed Cauchy data."""

    grid: object
    P: sp.csr_matrix
    free: np.ndarray

    @property
    def n_free(self):
        return self.P.shape[1]

    def expand(self, z, offset=None):
        u = self.P @ np.asarray(z, dtype=float)
        if offset is not None:
            u = u + offset
        return u.reshape(self.grid.shape)

    def restrict(self, u):
        """Free-unknown values of a full field."""
        return np.asarray(u, dtype=float).ravel()[self.free]

    def offset(self, dirichlet, neumann):
        """Field ``q`` with ``u = P z + q`` matching the given boundary data.

        ``dirichlet`` and ``neumann`` are values at ``grid.boundary_indices``.
        """
        g = self.grid
        f_full = np.zeros(g.size)
        g_full = np.zeros(g.size)
        f_full[g.boundary_indices] = dirichlet
        g_full[g.boundary_indices] = neumann
        q = np.zeros(g.size)
        q[g.boundary_indices] = dirichlet
        for k, terms in _ring_relations(g):
            q[k] = sum(c * (3 * f_full[b] - 2 * h * g_full[b] + q[inner]) / 4
                       for c, b, inner, h in terms)
        return q.reshape(g.shape)


def _ring_relations(grid):
    """First-ring nodes in dependency order with their Neumann relations.

    Each entry is ``(k, [(weight, boundary_node, inner_node, spacing), ...])``;
    the value at ``k`` is ``sum weight * (3 u_b + u_inner - 2 h g_b) / 4``.
    Non-corner ring nodes come first so ring corners can refer to them.
    """
    nx, ny, hx, hy = grid.nx, grid.ny, grid.dx, grid.dy
    f = grid.flat_index
    sides = []
    for j in range(2, ny - 2):
        sides.append((f(1, j), [(1.0, f(0, j), f(2, j), hx)]))
        sides.append((f(nx - 2, j), [(1.0, f(nx - 1, j), f(nx - 3, j), hx)]))
    for i in range(2, nx - 2):
        sides.append((f(i, 1), [(1.0, f(i, 0), f(i, 2), hy)]))
        sides.append((f(i, ny - 2), [(1.0, f(i, ny - 1), f(i, ny - 3), hy)]))
    corners = []
    for ci, cj, bi, bj in ((1, 1, 0, 0), (1, ny - 2, 0, ny - 1), (nx - 2, 1, nx - 1, 0), (nx - 2, ny - 2, nx - 1, ny - 1)):
        # x-direction relation through the side boundary node, y-direction likewise
        ii = 2 if ci == 1 else nx - 3
        jj = 2 if cj == 1 else ny - 3
        corners.append((f(ci, cj), [(0.5, f(bi, cj), f(ii, cj), hx), (0.5, f(ci, bj), f(ci, jj), hy)]))
    return [(int(k), [(c, int(b), int(n), h) for c, b, n, h in t]) for k, t in sides + corners]


def eliminate_cauchy(grid):
    """Unknown map for fields vanishing with their normal derivative on the boundary.

    The free unknowns are the nodes at least two steps inside the boundary,
    ``(nx - 4) * (ny - 4)`` of them.
    """
    if grid.nx < 7 or grid.ny < 7:
        raise GridError(f"Cauchy elimination needs at least 7 nodes per axis, got {grid.nx}x{grid.ny}")
    I, J = np.meshgrid(np.arange(2, grid.nx - 2), np.arange(2, grid.ny - 2), indexing="ij")
    free = grid.flat_index(I, J).ravel()
    col = np.full(grid.size, -1)
    col[free] = np.arange(free.size)

    rows = {int(k): {int(c): 1.0} for k, c in zip(free, col[free])}
    for k, terms in _ring_relations(grid):
        r = {}
        for c, _, inner, _ in terms:
            for cc, v in rows[inner].items():
                r[cc] = r.get(cc, 0.0) + 0.25 * c * v
        rows[k] = r
    ri, ci, vi = [], [], []
    for k, r in rows.items():
        for c, v in r.items():
            ri.append(k)
            ci.append(c)
            vi.append(v)
    P = sp.csr_matrix((vi, (ri, ci)), shape=(grid.size, free.size))
    return UnknownMap(grid, P, free)


@dataclass(frozen=True)
class WeightedLeastSquares:
    """Minimize ``sum_i (w_i * (A z - b)_i)^2`` over free unknowns ``z``.

    ``offset`` is added when the minimizer is expanded to a full field.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    row_weights: np.ndarray
    unknown_map: UnknownMap
    offset: np.ndarray
    n_residual_rows: int

    def weighted(self):
        """``(W A, W b)`` as explicit arrays."""
        W = sp.diags(self.row_weights)
        return (W @ self.matrix).tocsr(), self.row_weights * self.rhs


def _regularization_blocks(grid, umap, base, eta):
    """Rows ``sqrt(eta) h K (P z + base)`` for every discrete H^2 component ``K``."""
    if eta == 0:
        return [], [], []
    interior = grid.interior_indices
    everywhere = np.arange(grid.size)
    mats, rhs = [], []
    for n, K in enumerate(grid.h2_ops):
        rows = everywhere if n < 3 else interior
        Kr = K[rows]
        mats.append(Kr @ umap.P)
        rhs.append(-(Kr @ base))
    w = np.sqrt(eta * grid.cell_area)
    weights = [np.full(r.size, w) for r in rhs]
    return mats, rhs, weights


def _stack(grid, umap, res_mat, res_rhs, res_w, base, eta, offset):
    mats, rhs, weights = _regularization_blocks(grid, umap, base, eta)
    return WeightedLeastSquares(
        matrix=sp.vstack([res_mat] + mats, format="csr"),
        rhs=np.concatenate([res_rhs] + rhs),
        row_weights=np.concatenate([res_w] + weights),
        unknown_map=umap,
        offset=offset,
        n_residual_rows=res_rhs.size,
    )


def _nodes(grid):
    X, Y = grid.mesh
    return X.ravel(), Y.ravel()


def linearization(u, spec, grid):
    """Pieces of the linearized operator at ``u``.

    Returns ``(L, F, F_s, (F_px, F_py))`` with ``L`` the sparse
    ``div(A grad .)`` matrix and the rest as flat node arrays.
    """
    u = check_field(grid, u, "iterate").ravel()
    L = div_a_grad_matrix(grid, spec.coefficient(grid))
    X, Y = _nodes(grid)
    px, py = grid.dx_op @ u, grid.dy_op @ u
    Fv = _checked(spec.F(X, Y, u, px, py), X, Y, spec.label, "F")
    Fs = _checked(np.broadcast_to(spec.F_s(X, Y, u, px, py), u.shape), X, Y, spec.label, "F_s")
    gx, gy = spec.F_p(X, Y, u, px, py)
    gx = _checked(np.broadcast_to(gx, u.shape), X, Y, spec.label, "F_px")
    gy = _checked(np.broadcast_to(gy, u.shape), X, Y, spec.label, "F_py")
    return L, Fv, Fs, (gx, gy)


def _checked(v, X, Y, label, what):
    v = np.asarray(v, dtype=float)
    bad = ~np.isfinite(v)
    if np.any(bad):
        k = np.flatnonzero(bad)[0]
        raise EvaluationError(f"{label}: {what} is not finite at (x, y) = ({X[k]:.6g}, {Y[k]:.6g})")
    return v


def assemble_linearized(u_n, spec, grid, params, umap=None):
    """System whose minimizer is the increment ``h`` around iterate ``u_n``.

    Residual rows (one per interior node) carry
    ``sqrt(exp(2 lam mu)) h [-div(A grad phi) + F_s phi + F_p . grad phi]``
    against ``div(A grad u_n) - F(u_n)``; regularization rows carry
    ``sqrt(eta) h K (u_n + phi)`` for each discrete H^2 component ``K``.
    """
    umap = umap or eliminate_cauchy(grid)
    u = check_field(grid, u_n, "iterate").ravel()
    L, Fv, Fs, (gx, gy) = linearization(u, spec, grid)
    lin = -L + sp.diags(Fs) + sp.diags(gx) @ grid.dx_op + sp.diags(gy) @ grid.dy_op
    it = grid.interior_indices
    res_mat = lin.tocsr()[it] @ umap.P
    res_rhs = (L @ u - Fv)[it]
    w = np.sqrt(grid_factor(grid, params.carleman, doubling=True).ravel()[it] * grid.cell_area)
    return _stack(grid, umap, res_mat, res_rhs, w, u, params.eta, np.zeros(grid.shape))


def assemble_initial(spec, grid, params, umap=None):
    """System for the initial guess: ``div(A grad u0) = 0`` with the Cauchy data.

    The Carleman factor is ``exp(lam mu)`` unless ``params.initial_doubling``
    selects ``exp(2 lam mu)``.
    """
    umap = umap or eliminate_cauchy(grid)
    q = umap.offset(spec.dirichlet_values(grid), spec.neumann_values(grid)).ravel()
    L = div_a_grad_matrix(grid, spec.coefficient(grid))
    it = grid.interior_indices
    res_mat = L.tocsr()[it] @ umap.P
    res_rhs = -(L @ q)[it]
    w = np.sqrt(grid_factor(grid, params.carleman, doubling=params.initial_doubling).ravel()[it] * grid.cell_area)
    return _stack(grid, umap, res_mat, res_rhs, w, q, params.eta, q.reshape(grid.shape))


def normal_residual(sys, z):
    """``||A^T W^2 (A z - b)|| / ||A^T W^2 b||``."""
    Aw, bw = sys.weighted()
    ref = np.linalg.norm(Aw.T @ bw)
    r = np.linalg.norm(Aw.T @ (Aw @ z - bw))
    return float(r / ref) if ref > 0 else float(r)


def _method(sys, params):
    if params.method != "auto":
        return params.method
    g = sys.unknown_map.grid
    return "direct" if max(g.nx, g.ny) <= 100 else "iterative"


def solve_free(sys, params):
    """Minimizer over the free unknowns and its relative normal-equations residual."""
    Aw, bw = sys.weighted()
    N = (Aw.T @ Aw).tocsc()
    rhs = Aw.T @ bw
    ref = np.linalg.norm(rhs)
    if ref == 0:
        return np.zeros(N.shape[0]), 0.0

    if _method(sys, params) == "direct":
        try:
            lu = spla.splu(N, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise LinearSolverError(f"factorization failed: {exc}") from exc
        z = lu.solve(rhs)
        res = np.linalg.norm(rhs - N @ z) / ref
        for _ in range(3):
            if res <= params.ls_tol:
                break
            z = z + lu.solve(rhs - N @ z)
            res = np.linalg.norm(rhs - N @ z) / ref
        if not np.all(np.isfinite(z)):
            raise LinearSolverError("factorization produced non-finite values", res)
        return z, float(res)

    d = N.diagonal()
    M = sp.diags(1.0 / np.where(d > 0, d, 1.0))
    z, info = spla.cg(N, rhs, rtol=params.ls_tol, atol=0.0, maxiter=params.ls_max_iter, M=M)
    res = float(np.linalg.norm(rhs - N @ z) / ref)
    if info != 0:
        raise LinearSolverError(
            f"conjugate gradients did not reach rtol={params.ls_tol:g} in {params.ls_max_iter} "
            f"iterations (residual {res:.3e})", res)
    return z, res


def solve_ls(sys, params):
    """Minimizer of the weighted least-squares system as a full field."""
    z, _ = solve_free(sys, params)
    return sys.unknown_map.expand(z, sys.offset.ravel())


def dump_system(sys, directory, stem="system"):
    """Write ``W A`` in MatrixMarket format and ``W b`` as plain text."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    Aw, bw = sys.weighted()
    mmwrite(str(directory / f"{stem}.mtx"), Aw, precision=17)
    np.savetxt(directory / f"{stem}_rhs.txt", bw, fmt="%.17g")
    return directory / f"{stem}.mtx", directory / f"{stem}_rhs.txt"
