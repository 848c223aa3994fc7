"""
Exporting a least-squares system
================================

Each outer step solves a sparse weighted least-squares problem. It can be
written in MatrixMarket form to compare against other solvers.
"""

import tempfile

import numpy as np
import scipy.io
import scipy.sparse.linalg as spla

from carleman_qr import SolverParams, assemble_initial, build_grid, catalog, solve_free
from carleman_qr.qr_solver import dump_system

grid = build_grid(30)
params = SolverParams()
system = assemble_initial(catalog("ql2"), grid, params)
print("rows x free unknowns:", system.matrix.shape)

out = tempfile.mkdtemp()
mtx, rhs = dump_system(system, out, "ql2_initial")
print("written:", mtx, rhs)

# LSQR on the exported matrix agrees with the normal-equations solve
Aw = scipy.io.mmread(str(mtx)).tocsr()
bw = np.loadtxt(rhs)
z_lsqr = spla.lsqr(Aw, bw, atol=1e-14, btol=1e-14, iter_lim=50_000)[0]
z, res = solve_free(system, params)
print(f"normal-equations residual {res:.1e}, LSQR relative difference "
      f"{np.linalg.norm(z - z_lsqr) / np.linalg.norm(z):.1e}")
