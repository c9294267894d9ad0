import numpy as np
import pytest

from landau_base.collision_coefficients import CoefficientField
from landau_base.comparison import (
    SubsolutionParams, SupersolutionParams, envelope_check, find_supersolution, subsolution_residual,
    supersolution_residual,
)
from landau_base.phase_grid import DistributionField


def _soft_potential_coefficients(grid, t, radial, transverse, cbar):
    """abar = radial |v|^-1 v^v^ + transverse |v| (I - v^v^): the large-|v| shape for gamma = -1."""
    speed = grid.speed()[..., None, None]
    v_hat = np.stack(grid.velocity_mesh(), axis=-1) / grid.speed()[..., None]
    P = v_hat[..., :, None] * v_hat[..., None, :]
    abar = radial / speed * P + transverse * speed * (np.eye(3) - P)
    return CoefficientField(grid, t, -1.0, abar, np.full(grid.shape, cbar))


@pytest.fixture
def late_snapshots(homogeneous_grid):
    return [_soft_potential_coefficients(homogeneous_grid, t, 1.0, 2.0, 0.2) for t in (0.75, 1.0, 1.5)]


def test_subsolution_beta():
    params = SubsolutionParams(T_lower=1.0, C1=0.5)
    assert params.beta(1.0) == pytest.approx((2.0, -2.0))
    with pytest.raises(ValueError):
        params.beta(0.5)


def test_subsolution_threshold(late_snapshots):
    report = subsolution_residual(late_snapshots, SubsolutionParams(T_lower=1.0, C1=1.0))
    assert report.threshold is not None
    assert 1e-6 < report.threshold < 1e6
    above = subsolution_residual(late_snapshots, SubsolutionParams(T_lower=1.0, C1=1.05 * report.threshold))
    assert above.passed
    below = subsolution_residual(late_snapshots, SubsolutionParams(T_lower=1.0, C1=0.5 * report.threshold))
    assert not below.passed
    assert below.worst > 0.0


def test_constant_beta_is_not_a_subsolution(late_snapshots):
    report = subsolution_residual(late_snapshots, SubsolutionParams(T_lower=1.0, C1=1.0),
                                  beta_fn=lambda t: (1.0, 0.0))
    assert report.fraction < 1.0
    assert not report.passed


def test_subsolution_needs_late_snapshots(homogeneous_grid):
    early = [_soft_potential_coefficients(homogeneous_grid, 0.25, 1.0, 2.0, 0.2)]
    with pytest.raises(ValueError):
        subsolution_residual(early, SubsolutionParams(T_lower=1.0, C1=1.0))


def test_supersolution_search(homogeneous_grid):
    snapshots = [_soft_potential_coefficients(homogeneous_grid, t, 1.0, 0.5, 0.2) for t in (0.0, 0.5, 1.0)]
    best = find_supersolution(snapshots, rho=1.0)
    # the radial drift term needs 2 C >= q^2 * radial = 9
    assert best.C > 4.5
    assert best.alpha < 1e-6
    assert supersolution_residual(snapshots, best).passed
    slow_decay = supersolution_residual(snapshots, SupersolutionParams(rho=1.0, alpha=0.0, C=1.0))
    assert not slow_decay.passed
    with pytest.raises(ValueError):
        find_supersolution(snapshots, rho=0.0)


def test_envelope_check(homogeneous_grid):
    grid = homogeneous_grid
    params = SupersolutionParams(rho=1.0, alpha=0.3, C=1.0)
    speed = grid.speed()

    def envelope(t, scale):
        beta, _ = params.beta(t)
        return DistributionField(grid, t, -1.0, scale * np.exp(params.alpha * t - beta * speed ** 3))

    report = envelope_check([envelope(0.0, 0.5), envelope(1.0, 0.45)], params)
    assert report.K == pytest.approx(0.5)
    assert report.holds
    assert report.ratios[0][1] == pytest.approx(0.9)
    broken = envelope_check([envelope(0.0, 0.5), envelope(1.0, 0.6)], params)
    assert not broken.holds
    with pytest.raises(ValueError):
        envelope_check([envelope(0.0, 0.5)], params, shell=(10.0, 20.0))
