import pytest

from landau_base.moments import default_p_exponent, maxwellian_moments, moments, p_threshold
from landau_base.oracles import gaussian_moments
from landau_base.phase_grid import make_grid
from landau_base.scenarios import maxwellian, two_bump


@pytest.fixture
def fine_grid():
    return make_grid(0, None, None, 6.0, 24)


def test_p_exponent_threshold():
    assert p_threshold(-1.0) == pytest.approx(0.75)
    assert default_p_exponent(-1.0) == 1.0
    assert default_p_exponent(-3.0) == 5.0
    assert p_threshold(-3.0) == pytest.approx(4.5)


@pytest.mark.parametrize("density,temperature", [(1.0, 1.0), (2.0, 0.6)])
def test_maxwellian_moments(fine_grid, density, temperature):
    f = maxwellian(fine_grid, -1.0, density=density, temperature=temperature)
    totals = moments(f).total()
    exact = maxwellian_moments(density, temperature)
    oracle = gaussian_moments(density, temperature).value
    assert exact["E"] == pytest.approx(oracle[1], rel=1e-10)
    assert exact["H"] == pytest.approx(oracle[2], rel=1e-10)
    assert totals["M"] == pytest.approx(density, rel=1e-12)
    assert totals["E"] == pytest.approx(exact["E"], rel=1e-6)
    assert totals["H"] == pytest.approx(exact["H"], rel=1e-6)
    assert abs(totals["P1"]) < 1e-12


def test_drifting_maxwellian_carries_momentum(fine_grid):
    f = maxwellian(fine_grid, -1.0, drift=(0.5, 0.0, -0.25))
    totals = moments(f).total()
    assert totals["P1"] == pytest.approx(0.5, rel=1e-6)
    assert totals["P3"] == pytest.approx(-0.25, rel=1e-6)


def test_moment_rows_cover_every_spatial_node(spatial_grid):
    f = two_bump(spatial_grid, -1.0)
    field = moments(f)
    rows = list(field.rows())
    assert len(rows) == spatial_grid.n_x
    assert set(rows[0]) == {"t", "x1", "M", "E", "H", "P", "P1", "P2", "P3"}
    assert field.total()["M"] == pytest.approx(f.total_mass())


def test_p_exponent_must_exceed_threshold(unit_maxwellian):
    with pytest.raises(ValueError):
        moments(unit_maxwellian, p_exponent=0.5)
