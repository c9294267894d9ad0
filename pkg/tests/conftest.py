import numpy as np
import pytest

from landau_base.kernel_stencil import precompute_stencil
from landau_base.phase_grid import make_grid
from landau_base.scenarios import maxwellian


@pytest.fixture
def homogeneous_grid():
    return make_grid(0, None, None, 4.0, 12)


@pytest.fixture
def spatial_grid():
    return make_grid(1, 4.0, 8, 4.0, 12)


@pytest.fixture
def unit_maxwellian(homogeneous_grid):
    return maxwellian(homogeneous_grid, -1.0)


@pytest.fixture
def stencil_m1(homogeneous_grid):
    return precompute_stencil(homogeneous_grid, -1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
