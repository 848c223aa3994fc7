"""
A problem of your own
=====================

A ProblemSpec needs the diffusion matrix, the nonlinearity with its
derivatives and the Cauchy data. Here we manufacture one from
u* = cos(x) * exp(y) with F(x, s, p) = s^3 + |p|^2 - c(x).
"""

import numpy as np

from carleman_qr import ProblemSpec, build_grid, run
from carleman_qr.problem import constant_matrix, fd_derivative_fallback


def u_star(x, y):
    return np.cos(x) * np.exp(y)


def grad(x, y):
    return -np.sin(x) * np.exp(y), np.cos(x) * np.exp(y)


A = np.array([[1.5, 0.2], [0.2, 1.0]])


def source(x, y):
    # -div(A grad u*) + u*^3 + |grad u*|^2 must vanish
    u = u_star(x, y)
    div = A[0, 0] * (-u) + 2 * A[0, 1] * (-np.sin(x) * np.exp(y)) + A[1, 1] * u
    gx, gy = grad(x, y)
    return -div + u**3 + gx**2 + gy**2


spec = ProblemSpec(
    label="cubic",
    a_field=constant_matrix(A),
    nonlinearity=lambda x, y, s, px, py: s**3 + px**2 + py**2 - source(x, y),
    d_s=lambda x, y, s, px, py: 3 * s**2,
    d_p=lambda x, y, s, px, py: (2 * px, 2 * py),
    dirichlet=u_star,
    neumann=lambda x, y, nx, ny: grad(x, y)[0] * nx + grad(x, y)[1] * ny,
    true_solution=u_star,
)

grid = build_grid(50)
for name, s in [("analytic derivatives", spec), ("finite-difference derivatives", fd_derivative_fallback(spec))]:
    u, report = run(s, grid)
    err = np.abs(u - spec.interpolate_true(grid)).max() / np.abs(spec.interpolate_true(grid)).max()
    print(f"{name}: {report.iterations} iterations, rel error {err:.2e}")
