import numpy as np
import pytest

from landau_base.phase_grid import (
    FRAMED, DistributionField, FieldInterpolator, FrameTag, ball_cutoff, interpolate, make_grid, smooth_step,
    window_bump,
)


def test_make_grid_rejects_bad_parameters():
    with pytest.raises(ValueError):
        make_grid(2, 4.0, 8, 4.0, 12)
    with pytest.raises(ValueError):
        make_grid(0, None, None, 4.0, 13)
    with pytest.raises(ValueError):
        make_grid(0, None, None, -1.0, 12)
    with pytest.raises(ValueError):
        make_grid(1, None, 8, 4.0, 12)
    with pytest.raises(ValueError):
        make_grid(1, 4.0, 0, 4.0, 12)


def test_velocity_nodes_are_symmetric_cell_centers(homogeneous_grid):
    axis = homogeneous_grid.velocity_axis()
    assert axis.size == 12
    np.testing.assert_allclose(axis, -axis[::-1])
    assert np.min(np.abs(axis)) == pytest.approx(0.5 * homogeneous_grid.h_v)
    assert homogeneous_grid.shape == (12, 12, 12)


def test_spatial_layout(spatial_grid):
    assert spatial_grid.shape == (8, 12, 12, 12)
    assert spatial_grid.h_x == pytest.approx(0.5)
    offsets = spatial_grid.periodic_offsets()
    assert offsets.shape == (8, 1)
    assert np.all(np.abs(offsets) <= 2.0)
    assert len(spatial_grid.spatial_indices()) == 8


def test_distribution_field_validation(homogeneous_grid):
    with pytest.raises(ValueError):
        DistributionField(homogeneous_grid, 0.0, -1.0, -np.ones(homogeneous_grid.shape))
    with pytest.raises(ValueError):
        DistributionField(homogeneous_grid, 0.0, -1.0, np.full(homogeneous_grid.shape, np.nan))
    with pytest.raises(ValueError):
        DistributionField(homogeneous_grid, 0.0, 0.5, np.ones(homogeneous_grid.shape))
    with pytest.raises(ValueError):
        DistributionField(homogeneous_grid, 0.0, -1.0, np.ones((4, 4, 4)))

    f = DistributionField(homogeneous_grid, 0.0, -3.0, np.ones(homogeneous_grid.shape))
    assert not f.values.flags.writeable
    assert f.total_mass() == pytest.approx(8.0 ** 3)


def test_frame_tag_json():
    tag = FrameTag(FRAMED, 0.5, 0.25, 1.0)
    assert FrameTag.from_json(tag.to_json()) == tag
    assert FrameTag.from_json(FrameTag().to_json()) == FrameTag()
    with pytest.raises(ValueError):
        FrameTag(FRAMED, None, 0.25)


def test_interpolator_reproduces_linear_data(homogeneous_grid, rng):
    v1, v2, v3 = homogeneous_grid.velocity_mesh()
    interpolant = FieldInterpolator(homogeneous_grid, 1.0 + v1 - 2.0 * v2 + 0.5 * v3)
    points = rng.uniform(-3.0, 3.0, size=(50, 3))
    expected = 1.0 + points[:, 0] - 2.0 * points[:, 1] + 0.5 * points[:, 2]
    np.testing.assert_allclose(interpolant(None, points), expected, rtol=1e-12, atol=1e-12)


def test_interpolator_is_zero_beyond_the_cube(homogeneous_grid):
    f = DistributionField(homogeneous_grid, 0.0, -1.0, np.ones(homogeneous_grid.shape))
    assert interpolate(f, (), (5.0, 0.0, 0.0)) == 0.0
    last = homogeneous_grid.velocity_axis()[-1]
    midway = 0.5 * (last + homogeneous_grid.v_max)
    assert interpolate(f, (), (midway, 0.1, -0.2)) == pytest.approx(0.5)


def test_interpolator_edge_mode_extends_face_values(homogeneous_grid):
    interpolant = FieldInterpolator(homogeneous_grid, np.full(homogeneous_grid.shape, 2.0), outside="edge")
    np.testing.assert_allclose(interpolant(None, np.array([[10.0, -7.0, 0.0]])), [2.0])


def test_interpolator_is_periodic_in_x(spatial_grid):
    x = spatial_grid.spatial_axis()
    profile = np.cos(2.0 * np.pi * x / spatial_grid.L).reshape(8, 1, 1, 1)
    values = np.broadcast_to(profile, spatial_grid.shape)
    interpolant = FieldInterpolator(spatial_grid, values)
    v = np.array([[0.2, -0.4, 1.0]])
    assert interpolant(np.array([[0.3]]), v)[0] == pytest.approx(interpolant(np.array([[4.3]]), v)[0])
    # between the last node and the periodic image of the first
    expected = 0.5 * (np.cos(2.0 * np.pi * 3.5 / 4.0) + 1.0)
    assert interpolant(np.array([[3.75]]), v)[0] == pytest.approx(expected)


def test_smooth_profiles():
    s = np.linspace(-1.0, 2.0, 301)
    step = smooth_step(s)
    assert np.all(step[s <= 0.0] == 0.0)
    assert np.all(step[s >= 1.0] == 1.0)
    assert np.all(np.diff(step) >= 0.0)
    assert smooth_step(np.array([0.5]))[0] == pytest.approx(0.5)

    r = np.linspace(0.0, 3.0, 301)
    chi = ball_cutoff(r)
    assert np.all(chi[r <= 1.0] == 1.0)
    assert np.all(chi[r >= 2.0] == 0.0)

    phi = window_bump(r)
    assert np.all(phi[r <= 1.0] == 1.0)
    assert np.all(phi[r >= 2.0] == 0.0)
    assert np.all(np.diff(phi) <= 0.0)
