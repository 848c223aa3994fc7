"""Carleman weight ``mu(x) = |x - x0|^{-beta}`` and the factor ``exp(m lam mu)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, WeightDomainError

__all__ = ["CarlemanParams", "weight_mu", "carleman_factor", "grid_factor", "carleman_ratio"]


@dataclass(frozen=True)
class CarlemanParams:
    """Pole ``x0`` outside the domain, exponent ``beta`` and strength ``lam``.

    The defaults are the values used for all benchmark problems.
    """

    x0: tuple = (-4.0, 0.0)
    beta: float = 10.0
    lam: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if len(self.x0) != 2:
            raise ParameterError("x0 must be a 2D point")
        if not self.beta >= 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if not self.lam >= 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")


def weight_mu(x, cp):
    """``|x - x0|^{-beta}`` for points ``x`` of shape ``(..., 2)``.

    Raises
    ------
    WeightDomainError
        If any point is within distance 1 of ``x0``.
    """
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0] - cp.x0[0], x[..., 1] - cp.x0[1])
    if np.any(r <= 1.0):
        raise WeightDomainError(
            f"|x - x0| must exceed 1 for every point; min distance is {float(np.min(r)):.6g}"
        )
    return r ** (-cp.beta)


def carleman_factor(x, cp, doubling=True):
    """``exp(2 lam mu)`` if ``doubling`` else ``exp(lam mu)``."""
    m = 2.0 if doubling else 1.0
    return np.exp(m * cp.lam * weight_mu(x, cp))


def grid_factor(grid, cp, doubling=True):
    """Carleman factor at every node of ``grid``, shape ``(nx, ny)``."""
    X, Y = grid.mesh
    return carleman_factor(np.stack([X, Y], axis=-1), cp, doubling=doubling)


def carleman_ratio(grid, v, a, cp):
    """Discrete ``LHS / RHS`` of the Carleman estimate with unit constant.

    ``sum w |div(A grad v)|^2`` over
    ``lam sum w |grad v|^2 + lam^3 sum w v^2``, with ``w = exp(2 lam mu)``
    at every node. Meaningful for fields with zero Cauchy data.
    """
    from .grid import check_field, div_a_grad_matrix

    v = check_field(grid, v).ravel()
    w = grid_factor(grid, cp).ravel()
    Lv = div_a_grad_matrix(grid, a) @ v
    gx, gy = grid.dx_op @ v, grid.dy_op @ v
    lhs = np.sum(w * Lv**2)
    rhs = cp.lam * np.sum(w * (gx**2 + gy**2)) + cp.lam**3 * np.sum(w * v**2)
    return float(lhs / rhs)
