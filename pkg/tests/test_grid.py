import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carleman_qr.errors import CoefficientError, FieldError, GridError
from carleman_qr.grid import (
    Grid2D,
    NodeKind,
    build_grid,
    check_field,
    div_a_grad,
    div_a_grad_matrix,
    gradient,
    laplacian,
    norm_h2_discrete,
    norm_l2,
    normal_derivative,
)

A = np.array([[2.0, 1.0], [1.0, 2.0]])


def test_spacing_and_counts():
    g = build_grid(80)
    assert g.delta == pytest.approx(2 / 79)
    assert g.x[0] == -1.0 and g.x[-1] == pytest.approx(1.0)
    assert g.interior_indices.size == 78 * 78
    assert g.boundary_indices.size == 4 * 79


def test_too_small_grid():
    with pytest.raises(GridError):
        build_grid(2)


def test_flat_index_is_row_major(grid9):
    X, Y = grid9.mesh
    k = grid9.flat_index(3, 5)
    assert X.ravel()[k] == grid9.x[3]
    assert Y.ravel()[k] == grid9.y[5]


def test_node_kinds(grid9):
    kind = grid9.kind
    assert kind[0, 0] == NodeKind.CORNER
    assert kind[0, 4] == NodeKind.LEFT
    assert kind[8, 4] == NodeKind.RIGHT
    assert kind[4, 0] == NodeKind.BOTTOM
    assert kind[4, 8] == NodeKind.TOP
    assert kind[4, 4] == NodeKind.INTERIOR


def test_boundary_normals_are_unit_and_outward(grid9):
    nu = grid9.boundary_normals
    corner = np.abs(nu[:, 0] * nu[:, 1]) > 0
    assert corner.sum() == 4
    # sides carry unit normals; corners the average of the two adjacent ones
    np.testing.assert_allclose(np.hypot(nu[~corner, 0], nu[~corner, 1]), 1.0)
    np.testing.assert_allclose(np.abs(nu[corner]), 0.5)
    X, Y = grid9.mesh
    b = grid9.boundary_indices
    assert np.all(nu[:, 0] * X.ravel()[b] + nu[:, 1] * Y.ravel()[b] > 0)


def test_check_field_rejects_bad_input(grid9):
    with pytest.raises(FieldError, match="81"):
        check_field(grid9, np.zeros(80))
    u = np.zeros(grid9.shape)
    u[2, 3] = np.nan
    with pytest.raises(FieldError, match=r"\(2, 3\)"):
        check_field(grid9, u)


@pytest.mark.parametrize("deg", [0, 1, 2])
def test_gradient_exact_on_quadratics(grid9, deg):
    X, Y = grid9.mesh
    u = X**deg + 3 * X * Y - Y**deg
    g = gradient(grid9, u)
    np.testing.assert_allclose(g[..., 0], deg * X ** max(deg - 1, 0) * (deg > 0) + 3 * Y, atol=1e-12)
    np.testing.assert_allclose(g[..., 1], 3 * X - deg * Y ** max(deg - 1, 0) * (deg > 0), atol=1e-12)


def test_div_a_grad_exact_on_quadratic(grid9):
    # div(A grad u) for u = x^2 + xy + y^2 is 2*2 + 2*1*1 + 2*2 = 10
    X, Y = grid9.mesh
    r = div_a_grad(grid9, X**2 + X * Y + Y**2, A)
    np.testing.assert_allclose(r[grid9.interior_mask], 10.0, rtol=1e-12)
    assert np.all(r[~grid9.interior_mask] == 0)


def test_identity_matrix_gives_laplacian(grid9, rng):
    u = rng.normal(size=grid9.shape)
    np.testing.assert_allclose(div_a_grad(grid9, u, np.eye(2)), laplacian(grid9, u), atol=1e-10)


def test_variable_coefficient_flux_form():
    # A = diag(1 + x, 1): div(A grad x^2) = d/dx((1+x) 2x) = 2 + 4x
    g = build_grid(21)
    X, Y = g.mesh
    a = np.zeros(g.shape + (2, 2))
    a[..., 0, 0] = 1.5 + X
    a[..., 1, 1] = 1.0
    r = div_a_grad(g, X**2, a)
    np.testing.assert_allclose(r[g.interior_mask], (3 + 4 * X)[g.interior_mask], rtol=1e-10)


def test_div_a_grad_matrix_is_symmetric_on_interior_for_constant_a(grid9):
    L = div_a_grad_matrix(grid9, A).toarray()
    it = grid9.interior_indices
    sub = L[np.ix_(it, it)]
    np.testing.assert_allclose(sub, sub.T, atol=1e-12)


@pytest.mark.parametrize("bad", [[[1.0, 2.0], [2.0, 1.0]], [[1.0, 0.5], [0.0, 1.0]], [[-1.0, 0.0], [0.0, 1.0]]])
def test_non_spd_coefficients_raise(grid9, bad):
    with pytest.raises(CoefficientError):
        div_a_grad_matrix(grid9, bad)


def test_norms_of_constant_one(grid9):
    one = np.ones(grid9.shape)
    # node-sum quadrature: 81 nodes times cell area (2/8)^2
    assert norm_l2(grid9, one) == pytest.approx(np.sqrt(81 / 16))
    assert norm_h2_discrete(grid9, one) == pytest.approx(np.sqrt(81 / 16))


def test_normal_derivative_of_linear_field(grid9):
    X, Y = grid9.mesh
    d = normal_derivative(grid9, 2 * X - Y)
    nu = grid9.boundary_normals
    side = np.abs(nu[:, 0] * nu[:, 1]) < 1e-12
    np.testing.assert_allclose(d[side], (2 * nu[:, 0] - nu[:, 1])[side], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=5, max_value=15), st.floats(-3, 3), st.floats(-3, 3))
def test_div_a_grad_is_linear(n, a, b):
    g = build_grid(n)
    r = np.random.default_rng(n)
    u, v = r.normal(size=g.shape), r.normal(size=g.shape)
    lhs = div_a_grad(g, a * u + b * v, A)
    rhs = a * div_a_grad(g, u, A) + b * div_a_grad(g, v, A)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8 * (1 + np.abs(rhs).max()))


@settings(max_examples=25, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_div_a_grad_annihilates_affine_fields(c0, c1, c2):
    g = build_grid(11)
    X, Y = g.mesh
    r = div_a_grad(g, c0 + c1 * X + c2 * Y, A)
    assert np.abs(r).max() <= 1e-9 * (1 + abs(c0) + abs(c1) + abs(c2))


def test_rectangular_grid_spacing():
    g = Grid2D(5, 9, 0.0, 1.0, -2.0, 2.0)
    assert g.dx == 0.25 and g.dy == 0.5
    assert g.shape == (5, 9)
