import numpy as np
import pytest
import scipy.io

from carleman_qr.carleman import CarlemanParams
from carleman_qr.errors import GridError, LinearSolverError, ParameterError
from carleman_qr.grid import build_grid, normal_derivative
from carleman_qr.problem import catalog
from carleman_qr.qr_solver import (
    SolverParams,
    assemble_initial,
    assemble_linearized,
    dump_system,
    eliminate_cauchy,
    normal_residual,
    solve_free,
    solve_ls,
)


def dense_solution(sys):
    """Brute force: materialize W A and solve by Householder QR."""
    Aw, bw = sys.weighted()
    Q, R = np.linalg.qr(Aw.toarray())
    return np.linalg.solve(R, Q.T @ bw)


@pytest.mark.parametrize("n", [7, 8, 12])
def test_free_unknown_count(n):
    assert eliminate_cauchy(build_grid(n)).n_free == (n - 4) ** 2


def test_elimination_needs_seven_nodes():
    with pytest.raises(GridError):
        eliminate_cauchy(build_grid(6))


def test_expanded_fields_have_zero_cauchy_data(rng):
    g = build_grid(15)
    um = eliminate_cauchy(g)
    v = um.expand(rng.normal(size=um.n_free))
    assert np.all(v.ravel()[g.boundary_indices] == 0)
    d = normal_derivative(g, v)
    # side relations hold exactly except next to the corners, where ring
    # corners average the x and y relations
    X, Y = g.mesh
    xb, yb = X.ravel()[g.boundary_indices], Y.ravel()[g.boundary_indices]
    nu = g.boundary_normals
    tangential = np.where(nu[:, 0] != 0, np.abs(yb), np.abs(xb))
    exact = tangential < 1 - 1.5 * g.delta
    assert exact.sum() == 4 * (15 - 4)
    np.testing.assert_allclose(d[exact], 0, atol=1e-12)


def test_restrict_expand_roundtrip(rng):
    um = eliminate_cauchy(build_grid(11))
    z = rng.normal(size=um.n_free)
    np.testing.assert_array_equal(um.restrict(um.expand(z)), z)


def test_offset_reproduces_quadratic_exactly():
    # one-sided 3-point Neumann stencils are exact on quadratics, so the
    # affine parametrization recovers the whole field from its interior values
    g = build_grid(11)
    X, Y = g.mesh
    u = X**2 + X * Y - 2 * Y**2 + 0.5 * X
    gx, gy = 2 * X + Y + 0.5, X - 4 * Y
    b = g.boundary_indices
    nu = g.boundary_normals
    gn = gx.ravel()[b] * nu[:, 0] + gy.ravel()[b] * nu[:, 1]
    um = eliminate_cauchy(g)
    q = um.offset(u.ravel()[b], gn)
    np.testing.assert_allclose(um.expand(um.restrict(u), q.ravel()), u, atol=1e-13)


def test_system_shape_n7():
    g = build_grid(7)
    sys = assemble_initial(catalog("ql1"), g, SolverParams())
    # 25 residual rows, then I, Dx, Dy on 49 nodes and three second differences on 25
    assert sys.matrix.shape == (247, 9)
    assert sys.n_residual_rows == 25


def test_eta_zero_drops_regularization():
    sys = assemble_initial(catalog("ql1"), build_grid(9), SolverParams(eta=0.0))
    assert sys.matrix.shape == (49, 25)


@pytest.mark.parametrize("which", ["initial", "linearized"])
def test_oracle_dense_qr(which, rng):
    g = build_grid(7)
    spec = catalog("ql1")
    params = SolverParams()
    if which == "initial":
        sys = assemble_initial(spec, g, params)
    else:
        sys = assemble_linearized(spec.interpolate_true(g) + 0.01 * rng.normal(size=g.shape), spec, g, params)
    z, res = solve_free(sys, params)
    ref = dense_solution(sys)
    assert np.linalg.norm(z - ref) <= 1e-8 * np.linalg.norm(ref)
    assert res <= params.ls_tol


def test_direct_and_iterative_agree():
    g = build_grid(30)
    spec = catalog("ql2")
    sys = assemble_initial(spec, g, SolverParams())
    zd, _ = solve_free(sys, SolverParams(method="direct"))
    zi, res = solve_free(sys, SolverParams(method="iterative", ls_tol=1e-12))
    assert res <= 1e-12
    assert np.linalg.norm(zd - zi) <= 1e-7 * np.linalg.norm(zd)


def test_iterative_budget_exhaustion_raises():
    sys = assemble_initial(catalog("ql2"), build_grid(30), SolverParams())
    with pytest.raises(LinearSolverError) as info:
        solve_free(sys, SolverParams(method="iterative", ls_max_iter=2))
    assert info.value.residual > 0


def test_initial_guess_close_for_linear_like_problem():
    # the initial guess ignores F, but with full Cauchy data it is already reasonable
    g = build_grid(25)
    spec = catalog("ql1")
    u0 = solve_ls(assemble_initial(spec, g, SolverParams()), SolverParams())
    ut = spec.interpolate_true(g)
    np.testing.assert_allclose(u0.ravel()[g.boundary_indices], ut.ravel()[g.boundary_indices])
    assert np.abs(u0 - ut).max() < 0.5 * np.abs(ut).max()


def test_linearized_step_at_truth_is_small():
    g = build_grid(25)
    spec = catalog("ql1")
    params = SolverParams(eta=0.0)
    sys = assemble_linearized(spec.interpolate_true(g), spec, g, params)
    z, _ = solve_free(sys, params)
    assert np.abs(z).max() < 1e-8


def test_normal_residual_of_solution(rng):
    sys = assemble_initial(catalog("hj2"), build_grid(12), SolverParams())
    z, res = solve_free(sys, SolverParams())
    assert normal_residual(sys, z) == pytest.approx(res, abs=1e-14)
    assert normal_residual(sys, z + rng.normal(size=z.size)) > 1e-3


def test_weights_change_with_lambda():
    g = build_grid(9)
    a = assemble_initial(catalog("ql1"), g, SolverParams(carleman=CarlemanParams(lam=0.0)))
    b = assemble_initial(catalog("ql1"), g, SolverParams(carleman=CarlemanParams(lam=1e5)))
    k = a.n_residual_rows
    assert np.all(b.row_weights[:k] > a.row_weights[:k])
    np.testing.assert_array_equal(b.row_weights[k:], a.row_weights[k:])


def test_dump_system_roundtrip(tmp_path):
    sys = assemble_initial(catalog("ql1"), build_grid(8), SolverParams())
    mtx, rhs = dump_system(sys, tmp_path, "ql1")
    Aw, bw = sys.weighted()
    np.testing.assert_array_equal(scipy.io.mmread(str(mtx)).toarray(), Aw.toarray())
    np.testing.assert_array_equal(np.loadtxt(rhs), bw)


@pytest.mark.parametrize("kw", [{"eta": -1.0}, {"ls_tol": 0.0}, {"ls_tol": 2.0}, {"method": "qr"}, {"ls_max_iter": 0}])
def test_invalid_solver_params(kw):
    with pytest.raises(ParameterError):
        SolverParams(**kw)
