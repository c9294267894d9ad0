import numpy as np
import pytest

from landau_base.collision_coefficients import (
    coefficients_at, compute_coefficients, divergence_form_consistency, observed_order, quadrature_oracle,
)
from landau_base.diagnostics import ellipticity_verify
from landau_base.gaussian_frame import GaussianWeight, to_frame
from landau_base.kernel_stencil import (
    C_COULOMB, c_gamma, cube_power_average, lattice_zeta, origin_cell_averages, origin_lattice_weights,
    precompute_stencil,
)
from landau_base.oracles import cube_cell_integral, direct_convolution, lattice_sum_direct, radial_coefficients
from landau_base.phase_grid import make_grid
from landau_base.scenarios import maxwellian, two_bump
from landau_base.sde import CorePrior


def test_reaction_constants():
    assert c_gamma(-1.0) == 4.0
    assert c_gamma(-2.5) == 1.0
    assert c_gamma(-3.0) == C_COULOMB


def test_cube_power_average_closed_forms():
    assert cube_power_average(0.0, 0.3) == pytest.approx(1.0, rel=1e-13)
    # mean of |w|^2 over the cube is three times the variance of a uniform on [-h/2, h/2]
    assert cube_power_average(2.0, 0.3) == pytest.approx(0.3 ** 2 / 4.0, rel=1e-12)
    with pytest.raises(ValueError):
        cube_power_average(-3.0, 0.3)


@pytest.mark.parametrize("p", [-1.0, -2.0, -2.5, 1.0])
def test_cube_power_average_matches_spherical_quadrature(p):
    h = 0.4
    oracle = cube_cell_integral(p, h)
    assert cube_power_average(p, h) == pytest.approx(oracle.value / h ** 3, rel=1e-7)


@pytest.mark.parametrize("s,N,rtol", [(6.0, 12, 1e-5), (4.0, 20, 1e-4)])
def test_lattice_zeta_matches_direct_sum(s, N, rtol):
    oracle = lattice_sum_direct(s, N)
    assert lattice_zeta(s) == pytest.approx(oracle.value, rel=rtol)


def test_lattice_zeta_special_values():
    assert lattice_zeta(0.0) == -1.0
    with pytest.raises(ValueError):
        lattice_zeta(3.0)


def test_stencil_rules(homogeneous_grid):
    h = homogeneous_grid.h_v
    cell = precompute_stencil(homogeneous_grid, -2.0, "cell_average")
    lattice = precompute_stencil(homogeneous_grid, -2.0, "lattice")
    assert cell.a_origin == pytest.approx(origin_cell_averages(-2.0, h)[0])
    assert lattice.a_origin == pytest.approx(origin_lattice_weights(-2.0, h)[0])
    assert cell.c_origin > 0.0
    # both rules tabulate the same kernel away from the origin
    np.testing.assert_array_equal(cell.matrix_at((1, 2, 0)), lattice.matrix_at((1, 2, 0)))
    with pytest.raises(ValueError):
        precompute_stencil(homogeneous_grid, -2.0, "trapezoid")
    with pytest.raises(ValueError):
        precompute_stencil(homogeneous_grid, 0.0)


def test_matrix_kernel_annihilates_its_direction(homogeneous_grid):
    stencil = precompute_stencil(homogeneous_grid, -1.0)
    offset = (2, -1, 3)
    K = stencil.matrix_at(offset)
    np.testing.assert_allclose(K, K.T)
    w = homogeneous_grid.h_v * np.array(offset, dtype=np.float64)
    np.testing.assert_allclose(K @ w, 0.0, atol=1e-13)
    assert np.trace(K) == pytest.approx(2.0 * np.linalg.norm(w))


@pytest.mark.parametrize("gamma", [-1.0, -2.0, -2.7])
def test_fft_coefficients_match_direct_summation(spatial_grid, rng, gamma):
    f = two_bump(spatial_grid, gamma)
    stencil = precompute_stencil(spatial_grid, gamma)
    coeffs = compute_coefficients(f, stencil)
    points = spatial_grid.velocity_points()
    for _ in range(10):
        x_index = (int(rng.integers(spatial_grid.n_x)),)
        node = int(rng.integers(points.shape[0]))
        v_index = np.unravel_index(node, spatial_grid.velocity_shape)
        abar, cbar = quadrature_oracle(f, x_index, points[node], stencil)
        fft_abar = coeffs.abar[x_index + v_index]
        fft_cbar = coeffs.cbar[x_index + v_index]
        assert np.max(np.abs(fft_abar - abar)) <= 1e-10 * np.max(np.abs(abar))
        assert abs(fft_cbar - cbar) <= 1e-10 * abs(cbar)


def test_fft_coefficients_match_node_loop(unit_maxwellian, stencil_m1):
    coeffs = compute_coefficients(unit_maxwellian, stencil_m1)
    grid = unit_maxwellian.grid
    axis = grid.velocity_axis()
    for index in [(0, 5, 11), (6, 6, 5), (3, 9, 2)]:
        v = axis[list(index)]
        oracle = direct_convolution(unit_maxwellian.values, grid, v, -1.0, stencil_m1.a_origin, stencil_m1.c_origin)
        abar, conv_c = oracle.value
        np.testing.assert_allclose(coeffs.abar[index], abar, rtol=1e-10, atol=1e-13)
        assert coeffs.cbar[index] == pytest.approx(stencil_m1.reaction_constant * conv_c, rel=1e-10)


@pytest.mark.parametrize("gamma", [-1.0, -2.0])
def test_radial_data_matches_nested_quadrature(gamma):
    grid = make_grid(0, None, None, 6.0, 32)
    f = maxwellian(grid, gamma)
    stencil = precompute_stencil(grid, gamma)
    coeffs = compute_coefficients(f, stencil)
    index = (20, 16, 16)
    v = grid.velocity_axis()[list(index)]
    speed = float(np.linalg.norm(v))
    v_hat = v / speed
    abar = coeffs.abar[index]
    lam_par = v_hat @ abar @ v_hat
    lam_perp = 0.5 * (np.trace(abar) - lam_par)

    oracle = radial_coefficients(gamma, lambda r: (2.0 * np.pi) ** -1.5 * np.exp(-0.5 * r * r), speed, 12.0)
    par, perp, conv_c = oracle.value
    assert lam_par == pytest.approx(par, rel=1e-2)
    assert lam_perp == pytest.approx(perp, rel=1e-2)
    assert coeffs.cbar[index] == pytest.approx(c_gamma(gamma) * conv_c, rel=1e-2)


def test_coefficients_are_symmetric_and_psd(unit_maxwellian):
    stencil = precompute_stencil(unit_maxwellian.grid, -1.0, "cell_average")
    coeffs = compute_coefficients(unit_maxwellian, stencil)
    np.testing.assert_allclose(coeffs.abar, np.swapaxes(coeffs.abar, -1, -2))
    assert coeffs.is_psd()
    assert np.all(coeffs.cbar >= 0.0)


def test_coulomb_reaction_is_local(homogeneous_grid):
    f = maxwellian(homogeneous_grid, -3.0)
    stencil = precompute_stencil(homogeneous_grid, -3.0)
    coeffs = compute_coefficients(f, stencil)
    np.testing.assert_allclose(coeffs.cbar, C_COULOMB * f.values)
    # off-node evaluation interpolates f
    node = homogeneous_grid.velocity_points()[[0, 700]]
    _, cbar = coefficients_at(f, stencil, node)
    np.testing.assert_allclose(cbar, C_COULOMB * f.values.ravel()[[0, 700]], rtol=1e-12)


def test_coefficients_refuse_framed_or_mismatched_input(unit_maxwellian, stencil_m1):
    with pytest.raises(ValueError):
        compute_coefficients(to_frame(unit_maxwellian, GaussianWeight(0.2, 0.1)), stencil_m1)
    with pytest.raises(ValueError):
        compute_coefficients(maxwellian(unit_maxwellian.grid, -2.0), stencil_m1)


def _consistency_residuals(gamma, reaction_constant=None):
    spacings, residuals = [], []
    for n_v in (24, 32, 48):
        grid = make_grid(0, None, None, 5.0, n_v)
        f = maxwellian(grid, gamma)
        stencil = precompute_stencil(grid, gamma)
        result = divergence_form_consistency(f, stencil, reaction_constant)
        spacings.append(result.h_v)
        residuals.append(result.residual)
    return spacings, residuals


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [-1.0, -2.0, -2.5])
def test_divergence_form_converges_with_the_right_constant(gamma):
    spacings, residuals = _consistency_residuals(gamma)
    assert observed_order(spacings, residuals) >= 1.8


@pytest.mark.slow
def test_divergence_form_stalls_with_a_wrong_constant():
    spacings, residuals = _consistency_residuals(-1.0, reaction_constant=c_gamma(-1.0) + 1.0)
    assert observed_order(spacings, residuals) < 1.0


@pytest.mark.parametrize("gamma", [-1.0, -2.0, -3.0])
def test_ellipticity_exponents_above_a_unit_ball(gamma):
    grid = make_grid(0, None, None, 2.0, 16)
    core = CorePrior((), (0.0, 0.0, 0.0), 1.0, 1.0)
    f = core.as_field(grid, gamma)
    stencil = precompute_stencil(grid, gamma)
    report = ellipticity_verify(f, stencil, core)
    assert report.slope_all == pytest.approx(gamma, abs=0.3)
    assert report.slope_perp == pytest.approx(gamma + 2.0, abs=0.3)
    assert report.passes(gamma)
    assert report.lambda0 > 0.0
