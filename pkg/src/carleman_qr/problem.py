"""Problem definitions: diffusion matrix, nonlinearity, Cauchy data.

A :class:`ProblemSpec` describes

    -div(A(x) grad u) + F(x, u, grad u) = 0   in the rectangle,
    u = f,  d_nu u = g                          on its boundary.

All callables are vectorized over numpy arrays and take coordinates as two
separate arguments ``x, y``:

* ``a_field(x, y)`` -> array ``(..., 2, 2)``
* ``nonlinearity(x, y, s, px, py)``, ``d_s(...)`` -> array; ``d_p(...)`` -> ``(F_px, F_py)``
* ``dirichlet(x, y)``; ``neumann(x, y, nu_x, nu_y)`` (the trace ``grad u . nu``)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import CoefficientError, EvaluationError, ParameterError

__all__ = [
    "SMOOTHING",
    "ProblemSpec",
    "BenchmarkId",
    "constant_matrix",
    "eval_f",
    "eval_df",
    "make_viscous",
    "fd_derivative_fallback",
    "catalog",
]

# Smoothing radius for derivatives of |.|, sign and min; values stay exact.
SMOOTHING = 1e-12


def _sabs_d(t):
    return t / np.sqrt(t * t + SMOOTHING**2)


def _snorm(px, py):
    return np.sqrt(px * px + py * py + SMOOTHING**2)


def _min_selector(a, b):
    """Weight of ``a`` in a smooth surrogate for ``d min(a, b)``."""
    d = b - a
    return 0.5 * (1.0 + d / np.sqrt(d * d + SMOOTHING**2))


def constant_matrix(m):
    """``a_field`` callable returning the same 2x2 matrix everywhere."""
    m = np.asarray(m, dtype=float)

    def a_field(x, y):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.broadcast_to(m, shape + (2, 2)).copy()

    a_field.matrix = m
    return a_field


@dataclass(frozen=True)
class ProblemSpec:
    label: str
    a_field: Callable
    nonlinearity: Callable
    d_s: Optional[Callable]
    d_p: Optional[Callable]
    dirichlet: Callable
    neumann: Callable
    true_solution: Optional[Callable] = None
    kink_distance: Optional[Callable] = None
    description: str = ""
    clamp: Optional[float] = None

    def __post_init__(self):
        if self.clamp is not None and not self.clamp > 0:
            raise ParameterError(f"clamp must be positive, got {self.clamp}")

    # --- clamped evaluation -------------------------------------------------

    def _clip(self, s, px, py):
        if self.clamp is None:
            return s, px, py
        m = self.clamp
        return np.clip(s, -m, m), np.clip(px, -m, m), np.clip(py, -m, m)

    def F(self, x, y, s, px, py):
        return self.nonlinearity(x, y, *self._clip(s, px, py))

    def F_s(self, x, y, s, px, py):
        v = self.d_s(x, y, *self._clip(s, px, py))
        if self.clamp is not None:
            v = np.where(np.abs(s) > self.clamp, 0.0, v)
        return v

    def F_p(self, x, y, s, px, py):
        gx, gy = self.d_p(x, y, *self._clip(s, px, py))
        if self.clamp is not None:
            gx = np.where(np.abs(px) > self.clamp, 0.0, gx)
            gy = np.where(np.abs(py) > self.clamp, 0.0, gy)
        return gx, gy

    # --- data on a grid -----------------------------------------------------

    def coefficient(self, grid):
        """Diffusion matrix at every node; validated to be SPD."""
        X, Y = grid.mesh
        a = np.asarray(self.a_field(X, Y), dtype=float)
        a = np.broadcast_to(a, grid.shape + (2, 2))
        if not np.allclose(a[..., 0, 1], a[..., 1, 0]):
            raise CoefficientError(f"{self.label}: diffusion matrix is not symmetric")
        eig = np.linalg.eigvalsh(a)
        if not np.all(np.isfinite(eig)) or eig.min() <= 0:
            raise CoefficientError(f"{self.label}: diffusion matrix is not positive definite")
        return a

    def ellipticity(self, grid):
        """Largest ``gamma`` in (0, 1] with spectrum of ``A`` inside ``[gamma, 1/gamma]``."""
        eig = np.linalg.eigvalsh(self.coefficient(grid))
        return float(min(eig.min(), 1.0 / eig.max(), 1.0))

    def dirichlet_values(self, grid):
        """Dirichlet data at ``grid.boundary_indices``."""
        X, Y = grid.mesh
        b = grid.boundary_indices
        v = np.broadcast_to(self.dirichlet(X.ravel()[b], Y.ravel()[b]), b.shape)
        return _finite(v, f"{self.label}: dirichlet data")

    def neumann_values(self, grid):
        """Neumann trace at ``grid.boundary_indices`` (corners use the averaged normal)."""
        X, Y = grid.mesh
        b = grid.boundary_indices
        nu = grid.boundary_normals
        v = np.broadcast_to(self.neumann(X.ravel()[b], Y.ravel()[b], nu[:, 0], nu[:, 1]), b.shape)
        return _finite(v, f"{self.label}: neumann data")

    def interpolate_true(self, grid):
        if self.true_solution is None:
            raise ParameterError(f"{self.label} has no true solution")
        X, Y = grid.mesh
        return np.broadcast_to(self.true_solution(X, Y), grid.shape).astype(float)


def _finite(v, what):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise EvaluationError(f"{what} is not finite at entry {int(np.flatnonzero(~np.isfinite(v))[0])}")
    return v


def _split(x, p):
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    return x[..., 0], x[..., 1], p[..., 0], p[..., 1]


def _locate(v, x, y, what):
    v = np.asarray(v, dtype=float)
    bad = ~np.isfinite(v)
    if np.any(bad):
        k = np.flatnonzero(np.broadcast_to(bad, np.broadcast(v, x, y).shape))[0]
        xb = np.broadcast_to(x, bad.shape).ravel()[k]
        yb = np.broadcast_to(y, bad.shape).ravel()[k]
        raise EvaluationError(f"{what} is not finite at (x, y) = ({xb:.6g}, {yb:.6g})")
    return v


def eval_f(spec, x, s, p):
    """``F(x, s, p)`` for points ``x`` and gradients ``p`` of shape ``(..., 2)``."""
    xx, yy, px, py = _split(x, p)
    return _locate(spec.F(xx, yy, s, px, py), xx, yy, f"{spec.label}: F")


def eval_df(spec, x, s, p, h_val, h_grad):
    """Directional derivative ``F_s h + grad_p F . grad h``."""
    xx, yy, px, py = _split(x, p)
    h_grad = np.asarray(h_grad, dtype=float)
    fs = spec.F_s(xx, yy, s, px, py)
    gx, gy = spec.F_p(xx, yy, s, px, py)
    v = fs * h_val + gx * h_grad[..., 0] + gy * h_grad[..., 1]
    return _locate(v, xx, yy, f"{spec.label}: DF")


def make_viscous(nonlinearity, d_s, d_p, dirichlet, neumann, epsilon, *, label="viscous",
                 true_solution=None, kink_distance=None, description=""):
    """Wrap a first-order equation ``F(x, u, grad u) = 0`` as ``-eps Lap u + F = 0``."""
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    return ProblemSpec(
        label=label,
        a_field=constant_matrix(epsilon * np.eye(2)),
        nonlinearity=nonlinearity,
        d_s=d_s,
        d_p=d_p,
        dirichlet=dirichlet,
        neumann=neumann,
        true_solution=true_solution,
        kink_distance=kink_distance,
        description=description,
    )


def fd_derivative_fallback(spec):
    """Replace ``d_s`` and ``d_p`` by central differences of ``F``.

    Steps are ``1e-6 * max(1, |s|)`` in ``s`` and ``1e-6 * max(1, |p_k|)`` in
    each gradient component.
    """
    F = spec.nonlinearity

    def d_s(x, y, s, px, py):
        h = 1e-6 * np.maximum(1.0, np.abs(s))
        return (F(x, y, s + h, px, py) - F(x, y, s - h, px, py)) / (2 * h)

    def d_p(x, y, s, px, py):
        hx = 1e-6 * np.maximum(1.0, np.abs(px))
        hy = 1e-6 * np.maximum(1.0, np.abs(py))
        gx = (F(x, y, s, px + hx, py) - F(x, y, s, px - hx, py)) / (2 * hx)
        gy = (F(x, y, s, px, py + hy) - F(x, y, s, px, py - hy)) / (2 * hy)
        return gx, gy

    return replace(spec, d_s=d_s, d_p=d_p)


# --- benchmark catalog ------------------------------------------------------


class BenchmarkId(str, enum.Enum):
    QL1 = "ql1"
    QL2 = "ql2"
    HJ1 = "hj1"
    HJ2 = "hj2"
    HJ3 = "hj3"
    HJ4 = "hj4"
    HJ5 = "hj5"
    HJ6 = "hj6"

    @property
    def is_hamilton_jacobi(self):
        return self.value.startswith("hj")


DEFAULT_EPSILON = 1e-3
QL_MATRIX = np.array([[2.0, 1.0], [1.0, 2.0]])


def _dotted(grad):
    def neumann(x, y, nux, nuy):
        gx, gy = grad(x, y)
        return gx * nux + gy * nuy

    return neumann


def _zeros(x, y, s, px, py):
    return np.zeros(np.broadcast(x, y, s, px, py).shape)


def _const(c):
    def f(x, y, s, px, py):
        return np.full(np.broadcast(x, y, s, px, py).shape, float(c))

    return f


def _unit_p(x, y, s, px, py):
    n = _snorm(px, py)
    return px / n, py / n


def _ql1():
    def u(x, y):
        return -x**2 + 2 * y**2

    def grad(x, y):
        return -2 * x, 4 * y

    def F(x, y, s, px, py):
        return s + np.hypot(px, py) - (-x**2 + 2 * y**2 + np.sqrt(4 * x**2 + 16 * y**2) - 4)

    return ProblemSpec(
        label="ql1", a_field=constant_matrix(QL_MATRIX), nonlinearity=F, d_s=_const(1.0),
        d_p=_unit_p, dirichlet=u, neumann=_dotted(grad), true_solution=u,
        description="quasilinear, F = s + |p| - (...), u* = -x^2 + 2y^2",
    )


def _ql2():
    def u(x, y):
        return np.sin(np.pi * (x + y) / 2) + np.exp(x)

    def grad(x, y):
        c = np.cos(np.pi * (x + y) / 2)
        return np.pi / 2 * c + np.exp(x), np.pi / 2 * c

    def F(x, y, s, px, py):
        t = np.pi * (x + y) / 2
        c, sn, ex = np.cos(t), np.sin(t), np.exp(x)
        target = np.sqrt((np.pi / 2 * c + ex) ** 2 + np.pi**2 / 4 * c**2) + 1.5 * np.pi**2 * sn - 2 * ex
        return np.hypot(px, py) - target

    return ProblemSpec(
        label="ql2", a_field=constant_matrix(QL_MATRIX), nonlinearity=F, d_s=_zeros,
        d_p=_unit_p, dirichlet=u, neumann=_dotted(grad), true_solution=u,
        description="quasilinear, F = |p| - (...), u* = sin(pi(x+y)/2) + e^x",
    )


def _hj(label, F, d_s, d_p, u, grad, kink, description):
    return make_viscous(F, d_s, d_p, u, _dotted(grad), DEFAULT_EPSILON, label=label,
                        true_solution=u, kink_distance=kink, description=description)


def _hj1():
    def u(x, y):
        return -np.abs(x) + 0 * y

    def grad(x, y):
        return -np.sign(x) + 0 * y, 0 * x + 0 * y

    def F(x, y, s, px, py):
        return s + np.hypot(px, py) + np.abs(x) - 1

    return _hj("hj1", F, _const(1.0), _unit_p, u, grad, lambda x, y: np.abs(x) + 0 * y,
               "HJ, F = s + |p| + |x| - 1, u* = -|x|")


def _hj2():
    def u(x, y):
        return -np.abs(x + y) - y

    def grad(x, y):
        sg = np.sign(x + y)
        return -sg, -sg - 1

    def F(x, y, s, px, py):
        return px**2 + py**2 - (1 + (1 + np.sign(x + y)) ** 2)

    def d_p(x, y, s, px, py):
        return 2 * px + 0 * x, 2 * py + 0 * y

    return _hj("hj2", F, _zeros, d_p, u, grad, lambda x, y: np.abs(x + y) / np.sqrt(2),
               "HJ eikonal, F = |p|^2 - (1 + (1 + sign(x+y))^2), u* = -|x+y| - y")


def _hj3():
    def parts(x, y):
        r2 = x**2 + y**2
        e = np.exp(np.cos(2 * np.pi * r2))
        sn = np.sin(2 * np.pi * r2)
        return e, sn

    def u(x, y):
        e, _ = parts(x, y)
        return -np.abs(x + 0.5) + e

    def grad(x, y):
        e, sn = parts(x, y)
        return -np.sign(x + 0.5) - 4 * np.pi * x * sn * e, -4 * np.pi * y * sn * e

    def F(x, y, s, px, py):
        e, sn = parts(x, y)
        target = (20 * (-np.abs(x + 0.5) + e)
                  + np.abs(np.sign(x + 0.5) + 4 * np.pi * x * sn * e)
                  - np.abs(4 * np.pi * y * sn * e))
        return 20 * s + np.abs(px) - np.abs(py) - target

    def d_p(x, y, s, px, py):
        return _sabs_d(px) + 0 * x, -_sabs_d(py) + 0 * y

    return _hj("hj3", F, _const(20.0), d_p, u, grad, lambda x, y: np.abs(x + 0.5) + 0 * y,
               "HJ nonconvex, F = 20s + |p1| - |p2| - (...), u* = -|x+0.5| + e^{cos(2pi r^2)}")


def _hj4():
    def grad(x, y):
        sg = np.sign(x + y - 0.5)
        c = np.cos(x**2 / 2 + y**2)
        return sg + x * c, sg + 2 * y * c

    def u(x, y):
        return np.abs(x + y - 0.5) + np.sin(x**2 / 2 + y**2)

    def F(x, y, s, px, py):
        gx, gy = grad(x, y)
        return (-40 * s + np.abs(np.hypot(px, py) - 10)
                + 40 * (np.abs(x + y - 0.5) + np.sin(x**2 / 2 + y**2))
                - np.abs(np.hypot(gx, gy) - 10))

    def d_p(x, y, s, px, py):
        n = _snorm(px, py)
        w = _sabs_d(np.hypot(px, py) - 10)
        return w * px / n, w * py / n

    return _hj("hj4", F, _const(-40.0), d_p, u, grad, lambda x, y: np.abs(x + y - 0.5) / np.sqrt(2),
               "HJ, F = -40s + ||p| - 10| + (...), u* = |x+y-0.5| + sin(x^2/2 + y^2)")


def _hj5():
    def u(x, y):
        return -np.abs(x - 0.5) - np.abs(y)

    def grad(x, y):
        return -np.sign(x - 0.5) + 0 * y, -np.sign(y) + 0 * x

    def F(x, y, s, px, py):
        return (5 * s + np.hypot(px, py) - x * px
                + (5 * (np.abs(x - 0.5) + np.abs(y)) - x * np.sign(x - 0.5) - np.sqrt(2)))

    def d_p(x, y, s, px, py):
        n = _snorm(px, py)
        return px / n - x, py / n + 0 * y

    return _hj("hj5", F, _const(5.0), d_p, u, grad,
               lambda x, y: np.minimum(np.abs(x - 0.5), np.abs(y)),
               "HJ G-equation, F = 5s + |p| - x p1 + (...), u* = -|x-0.5| - |y|")


def _hj6():
    def grad(x, y):
        c = np.cos(np.pi * (x**2 + y**2))
        return -np.sign(x) + 2 * np.pi * x * c, 2 * np.pi * y * c

    def u(x, y):
        return -np.abs(x) + np.sin(np.pi * (x**2 + y**2))

    def H(t):
        return np.minimum(t, np.abs(t - 10) + 6)

    def F(x, y, s, px, py):
        h = np.hypot(*grad(x, y))
        return 20 * s + H(np.hypot(px, py)) - (20 * (-np.abs(x) + np.sin(np.pi * (x**2 + y**2))) + H(h))

    def d_p(x, y, s, px, py):
        t = np.hypot(px, py)
        w = _min_selector(t, np.abs(t - 10) + 6)
        dH = w + (1 - w) * _sabs_d(t - 10)
        n = _snorm(px, py)
        return dH * px / n, dH * py / n

    return _hj("hj6", F, _const(20.0), d_p, u, grad, lambda x, y: np.abs(x) + 0 * y,
               "HJ nonconvex, F = 20s + min{|p|, ||p|-10| + 6} - (...), u* = -|x| + sin(pi r^2)")


_BUILDERS = {
    BenchmarkId.QL1: _ql1,
    BenchmarkId.QL2: _ql2,
    BenchmarkId.HJ1: _hj1,
    BenchmarkId.HJ2: _hj2,
    BenchmarkId.HJ3: _hj3,
    BenchmarkId.HJ4: _hj4,
    BenchmarkId.HJ5: _hj5,
    BenchmarkId.HJ6: _hj6,
}


def catalog(id, epsilon=None):
    """Benchmark problem by id (``BenchmarkId`` or its string value).

    ``epsilon`` overrides the viscosity of the Hamilton-Jacobi problems
    (default ``1e-3``); it is ignored for the quasilinear ones.
    """
    try:
        bid = BenchmarkId(str(getattr(id, "value", id)).lower())
    except ValueError:
        raise ParameterError(f"unknown benchmark id {id!r}; choose from {[b.value for b in BenchmarkId]}") from None
    spec = _BUILDERS[bid]()
    if epsilon is not None and bid.is_hamilton_jacobi:
        if not epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {epsilon}")
        spec = replace(spec, a_field=constant_matrix(epsilon * np.eye(2)))
    return spec
