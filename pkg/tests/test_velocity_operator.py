import numpy as np
import pytest

from landau_base.phase_grid import make_grid
from landau_base.velocity_operator import diffusion_deficit, explicit_rate, theta_step, velocity_matrix


@pytest.fixture
def grid():
    return make_grid(0, None, None, 3.0, 10)


def _interior(array, margin=1):
    return array[margin:-margin, margin:-margin, margin:-margin]


def _coefficients(grid, A=None, B=None, C=0.0):
    n = grid.n_v
    A = np.broadcast_to(np.eye(3) if A is None else np.asarray(A), (n, n, n, 3, 3)).copy()
    B = np.broadcast_to(np.zeros(3) if B is None else np.asarray(B), (n, n, n, 3)).copy()
    return A, B, np.full((n, n, n), float(C))


def test_stencil_is_exact_on_quadratics(grid):
    v1, v2, v3 = grid.velocity_mesh()
    A = np.array([[1.0, 0.3, 0.0], [0.3, 2.0, -0.1], [0.0, -0.1, 0.5]])
    L = velocity_matrix(*_coefficients(grid, A=A), grid.h_v)
    applied = (L @ (v1 * v2).ravel()).reshape(grid.velocity_shape)
    np.testing.assert_allclose(_interior(applied), 2.0 * A[0, 1], atol=1e-12)
    applied = (L @ (v1 ** 2 + v2 ** 2 + v3 ** 2).ravel()).reshape(grid.velocity_shape)
    np.testing.assert_allclose(_interior(applied), 2.0 * np.trace(A), atol=1e-11)


def test_upwind_drift_and_reaction(grid):
    v1, _, _ = grid.velocity_mesh()
    L = velocity_matrix(*_coefficients(grid, A=np.zeros((3, 3)), B=[1.5, 0.0, 0.0], C=-2.0), grid.h_v)
    applied = (L @ v1.ravel()).reshape(grid.velocity_shape)
    np.testing.assert_allclose(_interior(applied), 1.5 - 2.0 * _interior(v1), atol=1e-12)


def test_viscosity_adds_to_the_diagonal(grid):
    A, B, C = _coefficients(grid, A=np.zeros((3, 3)))
    L = velocity_matrix(A, B, C, grid.h_v, eps=0.2)
    assert L.diagonal() == pytest.approx(np.full(grid.n_v ** 3, -6.0 * 0.2 / grid.h_v ** 2))
    assert explicit_rate(A, B, grid.h_v, eps=0.2) == pytest.approx(1.2 / grid.h_v ** 2)


def test_solvers_agree(grid, rng):
    L = velocity_matrix(*_coefficients(grid, C=-0.5), grid.h_v)
    u = rng.uniform(size=grid.velocity_shape)
    direct = theta_step(u, L, 0.05, 1.0, solver="direct")
    iterative = theta_step(u, L, 0.05, 1.0, solver="bicgstab", tol=1e-12)
    np.testing.assert_allclose(iterative.values, direct.values, rtol=1e-8, atol=1e-10)
    assert iterative.iterations > 0


def test_explicit_step_is_a_matrix_product(grid, rng):
    L = velocity_matrix(*_coefficients(grid), grid.h_v)
    u = rng.uniform(size=grid.velocity_shape)
    step = theta_step(u, L, 0.01, 0.0)
    np.testing.assert_allclose(step.values.ravel(), u.ravel() + 0.01 * (L @ u.ravel()))
    assert step.iterations == 0


def test_unknown_solver_is_rejected(grid):
    L = velocity_matrix(*_coefficients(grid), grid.h_v)
    with pytest.raises(ValueError):
        theta_step(np.ones(grid.velocity_shape), L, 0.01, 1.0, solver="gmres")


def _off_diagonal(L):
    coo = L.tocoo()
    return coo.data[coo.row != coo.col]


def test_strong_cross_term_keeps_the_step_nonnegative(grid):
    A = np.array([[1.0, 0.95, 0.0], [0.95, 1.0, 0.0], [0.0, 0.0, 1.0]])
    L = velocity_matrix(*_coefficients(grid, A=A), grid.h_v)
    assert _off_diagonal(L).min() >= 0.0
    centered = velocity_matrix(*_coefficients(grid, A=A), grid.h_v, cross_stencil="centered")
    assert _off_diagonal(centered).min() < 0.0

    spike = np.zeros(grid.velocity_shape)
    spike[5, 5, 5] = 1.0
    step = theta_step(spike, L, 0.05, 1.0, solver="direct")
    assert step.values.min() >= -1e-14
    # the row sums vanish, so the spike keeps its mass away from the walls
    assert step.values.sum() == pytest.approx(1.0, rel=1e-3)


def test_deficit_restores_diagonal_dominance(grid):
    A = np.array([[1.0, 0.6, -0.6], [0.6, 1.0, 0.0], [-0.6, 0.0, 1.0]])
    np.testing.assert_allclose(diffusion_deficit(A), [0.2, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(diffusion_deficit(A, eps=0.5), [0.0, 0.0, 0.0])
    L = velocity_matrix(*_coefficients(grid, A=A), grid.h_v)
    assert _off_diagonal(L).min() >= 0.0
    np.testing.assert_allclose(np.asarray(L.sum(axis=1)).ravel().reshape(grid.velocity_shape)[1:-1, 1:-1, 1:-1],
                               0.0, atol=1e-10)


def test_implicit_step_is_monotone_for_random_anisotropic_coefficients(grid, rng):
    n = grid.n_v
    R = rng.normal(size=(n, n, n, 3, 3))
    A = np.einsum("...ij,...kj->...ik", R, R) / 3.0 + 0.05 * np.eye(3)
    B = rng.normal(size=(n, n, n, 3))
    C = -rng.uniform(0.0, 2.0, size=(n, n, n))
    L = velocity_matrix(A, B, C, grid.h_v)
    assert _off_diagonal(L).min() >= 0.0
    u = rng.uniform(size=grid.velocity_shape) * (rng.uniform(size=grid.velocity_shape) < 0.3)
    step = theta_step(u, L, 0.1, 1.0, solver="direct")
    assert step.values.min() >= -1e-13 * step.values.max()


def test_unknown_cross_stencil_is_rejected(grid):
    with pytest.raises(ValueError):
        velocity_matrix(*_coefficients(grid), grid.h_v, cross_stencil="skewed")
