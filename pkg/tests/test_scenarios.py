import numpy as np
import pytest

from landau_base.phase_grid import make_grid
from landau_base.scenarios import (
    bi_gaussian, builtin_scenarios, compact_bump, maxwellian_perturbation, scenario_by_name, two_bump, vacuum_core,
)


def test_every_builtin_scenario_builds(homogeneous_grid, spatial_grid):
    for scenario in builtin_scenarios():
        grid = spatial_grid if scenario.d_x else homogeneous_grid
        f = scenario.build(grid, -1.0)
        assert f.values.shape == grid.shape
        assert np.all(f.values >= 0.0)
        assert f.total_mass() > 0.0
        assert f.is_physical


def test_lookup_by_name():
    assert scenario_by_name("two_bump").d_x == 1
    with pytest.raises(ValueError, match="available"):
        scenario_by_name("plasma_ball")


def test_masses(homogeneous_grid, spatial_grid):
    assert bi_gaussian(homogeneous_grid, -2.0).total_mass() == pytest.approx(1.0)
    assert maxwellian_perturbation(homogeneous_grid, -1.0).total_mass() == pytest.approx(1.0)
    # the out-of-phase modulation cancels in the spatial average
    f = two_bump(spatial_grid, -1.0)
    assert f.total_mass() == pytest.approx(spatial_grid.L)
    column_mass = np.sum(f.values, axis=(1, 2, 3)) * spatial_grid.h_v ** 3
    assert column_mass.max() > column_mass.min()


def test_compact_bump_support(homogeneous_grid):
    bump = compact_bump(homogeneous_grid, 2.0)
    speed = homogeneous_grid.speed()
    assert np.all(bump[speed >= 2.0] == 0.0)
    assert np.all(bump[speed < 2.0] > 0.0)
    assert bump.max() <= 1.0


def test_vacuum_core_is_centred_in_space():
    grid = make_grid(1, 4.0, 8, 3.0, 12)
    f = vacuum_core(grid, -2.0, smoothing=0.0)
    occupied = np.nonzero(np.any(f.values > 0.0, axis=(1, 2, 3)))[0]
    np.testing.assert_array_equal(grid.spatial_axis()[occupied], [1.5, 2.0, 2.5])


def test_perturbation_amplitude_bound(homogeneous_grid):
    with pytest.raises(ValueError):
        maxwellian_perturbation(homogeneous_grid, -1.0, amplitude=0.4)
    f = maxwellian_perturbation(homogeneous_grid, -1.0, amplitude=0.33)
    assert f.values.min() > 0.0
