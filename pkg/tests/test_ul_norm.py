import numpy as np
import pytest

from landau_base.scenarios import gaussian
from landau_base.ul_norm import (
    centered_difference, multi_indices, richardson_order, shift, ul_norm, ul_norm_values, window_l2_squared,
    y_norm_values,
)


def test_shift_fills_with_zeros_unless_periodic():
    values = np.arange(5.0)
    np.testing.assert_array_equal(shift(values, 0, 2, periodic=False), [2.0, 3.0, 4.0, 0.0, 0.0])
    np.testing.assert_array_equal(shift(values, 0, -1, periodic=False), [0.0, 0.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(shift(values, 0, 2, periodic=True), [2.0, 3.0, 4.0, 0.0, 1.0])


def test_centered_differences_are_second_order():
    errors = []
    spacings = []
    for n in (32, 64):
        h = 2.0 * np.pi / n
        x = h * np.arange(n)
        first = centered_difference(np.sin(x), 0, 1, h, periodic=True)
        second = centered_difference(np.sin(x), 0, 2, h, periodic=True)
        errors.append(max(np.abs(first - np.cos(x)).max(), np.abs(second + np.sin(x)).max()))
        spacings.append(h)
    order = np.log(errors[0] / errors[1]) / np.log(spacings[0] / spacings[1])
    assert order == pytest.approx(2.0, abs=0.1)


def test_multi_indices_count():
    assert len(list(multi_indices(2, 2))) == 6
    assert len(list(multi_indices(4, 1))) == 5
    assert all(sum(index) <= 3 for index in multi_indices(3, 3))


def test_richardson_order_recovers_quadratic_convergence():
    spacings = (0.4, 0.2, 0.1)
    values = tuple(1.0 + h ** 2 for h in spacings)
    assert richardson_order(spacings, values) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        richardson_order((0.4, 0.2, 0.15), values)


def test_homogeneous_norm_is_window_mass_times_velocity_norm(homogeneous_grid):
    values = gaussian(homogeneous_grid)
    expected = window_l2_squared() * np.sum(values ** 2) * homogeneous_grid.velocity_cell_volume
    assert ul_norm_values(homogeneous_grid, values, 0, 0) == pytest.approx(expected, rel=1e-12)
    weighted = ul_norm_values(homogeneous_grid, values, 0, 1)
    assert weighted > ul_norm_values(homogeneous_grid, values, 0, 0)


def test_x_independent_field_matches_homogeneous_value(spatial_grid, homogeneous_grid):
    velocity = gaussian(spatial_grid)
    values = np.broadcast_to(spatial_grid.broadcast_velocity(velocity), spatial_grid.shape)
    expected = ul_norm_values(homogeneous_grid, gaussian(homogeneous_grid), 0, 0)
    assert ul_norm_values(spatial_grid, values, 0, 0) == pytest.approx(expected, rel=1e-2)


def test_derivative_terms_add_to_the_norm(unit_maxwellian):
    low = ul_norm(unit_maxwellian, 0, 0).value_Hkl
    high = ul_norm(unit_maxwellian, 2, 0).value_Hkl
    assert high > low > 0.0


def test_invalid_orders_are_rejected(homogeneous_grid):
    values = np.ones(homogeneous_grid.shape)
    with pytest.raises(ValueError):
        ul_norm_values(homogeneous_grid, values, 5, 0)
    with pytest.raises(ValueError):
        ul_norm_values(homogeneous_grid, values, 0, -1)
    with pytest.raises(ValueError):
        ul_norm_values(homogeneous_grid, np.full(homogeneous_grid.shape, np.inf), 0, 0)


def test_y_norm_of_a_steady_trajectory(homogeneous_grid):
    values = gaussian(homogeneous_grid)
    times = [0.0, 0.1, 0.2, 0.3]
    h00 = ul_norm_values(homogeneous_grid, values, 0, 0)
    h01 = ul_norm_values(homogeneous_grid, values, 0, 1)
    expected = np.sqrt(h00) + np.sqrt(0.3 * h01)
    assert y_norm_values(homogeneous_grid, [values] * 4, times, 0) == pytest.approx(expected)
