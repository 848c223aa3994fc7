"""
Solving a quasilinear Cauchy problem
====================================

The first benchmark has u* = -x^2 + 2y^2, A = [[2, 1], [1, 2]] and a
nonlinearity with |grad u|. Both the value and the normal derivative of u*
are given on the boundary; nothing else is known.
"""

import numpy as np

from carleman_qr import IterationParams, SolverParams, build_grid, catalog, run

spec = catalog("ql1")
grid = build_grid(80)

# Run the loop with the default weight (lambda=4, beta=10, x0=(-4, 0)) and
# regularization eta=1e-4. The initial guess solves div(A grad u) = 0 only.
u, report = run(spec, grid, SolverParams(), IterationParams())

print(f"stop reason: {report.stop_reason} after {report.iterations} iterations")
for rec in report.records:
    inc = "-" if rec.increment_l2 is None else f"{rec.increment_l2:.3e}"
    print(f"  n={rec.n}  |h|={inc:>10s}  weighted error={rec.error_weighted:.3e}  {rec.wall_ms:.0f} ms")

u_true = spec.interpolate_true(grid)
print("relative max error:", np.abs(u - u_true).max() / np.abs(u_true).max())
