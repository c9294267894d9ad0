import numpy as np
import pytest

from landau_base.collision_coefficients import CoefficientField, compute_coefficients
from landau_base.gaussian_frame import FramedCoefficients
from landau_base.kernel_stencil import precompute_stencil
from landau_base.linear_solver import LinearStepConfig, integrate_linear
from landau_base.oracles import ito_moments
from landau_base.phase_grid import interpolate, make_grid
from landau_base.scenarios import maxwellian
from landau_base.sde import (
    CorePrior, FrozenCoefficients, ParticleEnsemble, SdeConfig, SnapshotCoefficients, core_spreading_experiment,
    cutoff_coefficients, feynman_kac, min_sigma_eigenvalues, simulate, spreading_exponent,
)


def _gaussian_density(temperature):
    def density(X, V):
        return (2.0 * np.pi * temperature) ** -1.5 * np.exp(-np.sum(V * V, axis=-1) / (2.0 * temperature))

    return density


def test_config_validation():
    with pytest.raises(ValueError):
        SdeConfig(eps=0.0)
    with pytest.raises(ValueError):
        SdeConfig(ds=0.0)
    with pytest.raises(ValueError):
        SdeConfig(R_cut=0.5)
    with pytest.raises(ValueError):
        SdeConfig(block_size=3)


def test_odd_path_count_is_rounded_to_whole_antithetic_pairs():
    cfg = SdeConfig(ds=0.1, n_paths=9, block_size=4, seed=1)
    assert cfg.n_paths == 10
    assert SdeConfig(n_paths=9, antithetic=False).n_paths == 9
    ensemble = simulate((), (0.0, 0.0, 0.0), 0.2, FrozenCoefficients(np.eye(3)), cfg)
    assert ensemble.n_paths == 10
    assert len(ensemble.V) == 10


def test_core_prior(spatial_grid):
    core = CorePrior((2.0,), (0.0, 0.0, 0.0), 0.75, 0.5)
    x = np.array([[2.1], [2.1], [3.0], [2.0]])
    v = np.array([[0.1, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.7, 0.0]])
    np.testing.assert_array_equal(core.indicator(x, v, L=4.0), [0.5, 0.0, 0.0, 0.5])
    # 5.9 sits 0.1 from 2.0 on a torus of length 3.8
    assert core.indicator(np.array([[5.9]]), np.zeros((1, 3)), L=3.8)[0] == 0.5
    f = core.as_field(spatial_grid, -1.0)
    assert f.values.max() == 0.5
    assert f.values[0].max() == 0.0
    with pytest.raises(ValueError):
        CorePrior((0.0,), (0.0, 0.0, 0.0), 0.0, 1.0)


def test_cutoff_coefficients_blend_to_the_identity(unit_maxwellian, stencil_m1):
    coeffs = compute_coefficients(unit_maxwellian, stencil_m1)
    cut = cutoff_coefficients(coeffs, 1.5)
    speed = unit_maxwellian.grid.speed()
    inner = speed <= 1.5
    outer = speed >= 3.0
    np.testing.assert_array_equal(cut.abar[inner], coeffs.abar[inner])
    np.testing.assert_allclose(cut.abar[outer], np.broadcast_to(np.eye(3), cut.abar[outer].shape))
    np.testing.assert_array_equal(cut.cbar, coeffs.cbar)
    assert cut.cutoff_radius == 1.5
    with pytest.raises(ValueError):
        cutoff_coefficients(coeffs, 0.5)


def test_snapshot_coefficients_are_total_and_elliptic(unit_maxwellian):
    stencil = precompute_stencil(unit_maxwellian.grid, -1.0, "cell_average")
    early = compute_coefficients(unit_maxwellian, stencil)
    late = CoefficientField(early.grid, 1.0, early.gamma, 3.0 * early.abar, 3.0 * early.cbar)
    model = SnapshotCoefficients([early, late], R_cut=2.0, eps=1e-3)
    v = np.array([[0.5, 0.5, -0.5], [10.0, 0.0, 0.0], [0.0, -50.0, 3.0]])
    x = np.zeros((3, 3))
    sigma = model.sigma(0.5, x, v)
    np.testing.assert_allclose(sigma[1:], np.broadcast_to(np.sqrt(1.001) * np.eye(3), (2, 3, 3)), rtol=1e-12)
    np.testing.assert_allclose(model.abar(0.5, x, v)[0], 2.0 * model.abar(0.0, x, v)[0], rtol=1e-12)
    assert np.all(min_sigma_eigenvalues(model, 0.25, x, v) >= np.sqrt(1e-3) * (1.0 - 1e-9))
    np.testing.assert_allclose(model.cbar(0.0, x, v)[1:], 0.0)
    with pytest.raises(ValueError):
        SnapshotCoefficients([late, early], R_cut=2.0, eps=1e-3)


@pytest.mark.parametrize("landau_scaling,variance", [(False, 1.0), (True, 2.0)])
def test_ito_moments_of_brownian_velocity(landau_scaling, variance):
    t, ds, n = 1.0, 0.05, 100000
    cfg = SdeConfig(ds=ds, n_paths=n, seed=11, landau_scaling=landau_scaling)
    x0 = np.array([0.3, -0.2, 0.1])
    v0 = np.array([0.5, 0.0, -1.0])
    ensemble = simulate(x0, v0, t, FrozenCoefficients(np.eye(3)), cfg)
    exact = ito_moments(t, x0, v0, ds=ds, noise_variance=variance)
    dV = ensemble.V - exact.mean_V
    dX = ensemble.X - exact.mean_X
    np.testing.assert_allclose(ensemble.V.mean(axis=0), exact.mean_V, atol=1e-12)
    np.testing.assert_allclose(ensemble.X.mean(axis=0), exact.mean_X, atol=1e-12)
    # antithetic pairs share squared deviations, so n / 2 samples are independent
    independent = n / 2
    var_V = exact.cov_V[0, 0]
    for axis in range(3):
        assert abs(np.mean(dV[:, axis] ** 2) - var_V) <= 4.0 * var_V * np.sqrt(2.0 / independent)
        assert abs(np.mean(dX[:, axis] ** 2) - exact.var_X) <= 4.0 * exact.var_X * np.sqrt(2.0 / independent)
        spread = np.sqrt((exact.var_X * var_V + exact.cov_XV ** 2) / independent)
        assert abs(np.mean(dX[:, axis] * dV[:, axis]) - exact.cov_XV) <= 4.0 * spread


@pytest.mark.slow
def test_feynman_kac_matches_the_frozen_heat_flow(rng):
    t, T0, c = 0.2, 0.8, 0.3
    cfg = SdeConfig(ds=0.02, n_paths=100000, seed=5)
    model = FrozenCoefficients(np.eye(3), cbar=c)
    exact = _gaussian_density(T0 + 2.0 * t)
    z_scores = []
    for stream, v in enumerate(rng.uniform(-1.5, 1.5, size=(20, 3))):
        estimate = feynman_kac(simulate((), v, t, model, cfg, stream=stream), _gaussian_density(T0))
        assert estimate.hits == estimate.n_paths
        target = np.exp(c * t) * exact(None, v[None, :])[0]
        z_scores.append((estimate.estimate - target) / estimate.std_error)
    z_scores = np.array(z_scores)
    assert np.all(np.abs(z_scores) <= 4.0)
    assert np.mean(z_scores ** 2) < 2.0


@pytest.mark.slow
def test_feynman_kac_agrees_with_the_deterministic_solve():
    grid = make_grid(0, None, None, 6.0, 48)
    f0 = maxwellian(grid, -1.0, temperature=0.8)
    t, c = 0.2, 0.3
    solve = integrate_linear(f0, FramedCoefficients.constant(grid, np.eye(3), C=c), t,
                             LinearStepConfig(dt=0.01, theta=0.5, conserve_moments=False)).final
    cfg = SdeConfig(ds=0.02, n_paths=100000, seed=9)
    model = FrozenCoefficients(np.eye(3), cbar=c)
    axis = grid.velocity_axis()
    for stream, index in enumerate([(24, 24, 24), (30, 20, 25), (16, 27, 33)]):
        v = axis[list(index)]
        estimate = feynman_kac(simulate((), v, t, model, cfg, stream=stream), _gaussian_density(0.8))
        deterministic = interpolate(solve, (), v)
        assert abs(estimate.estimate - deterministic) <= 4.0 * estimate.std_error + 0.02 * solve.values.max()


def test_paths_do_not_depend_on_threads():
    model = FrozenCoefficients(np.diag([1.0, 0.5, 2.0]), cbar=0.1)
    cfg = SdeConfig(ds=0.05, n_paths=3000, block_size=512, seed=3)
    serial = simulate((0.0,), (0.2, 0.0, 0.0), 0.5, model, cfg)
    threaded = simulate((0.0,), (0.2, 0.0, 0.0), 0.5, model, SdeConfig(ds=0.05, n_paths=3000, block_size=512,
                                                                       seed=3, threads=4))
    np.testing.assert_array_equal(serial.X, threaded.X)
    np.testing.assert_array_equal(serial.V, threaded.V)
    np.testing.assert_array_equal(serial.W_c, threaded.W_c)
    reseeded = simulate((0.0,), (0.2, 0.0, 0.0), 0.5, model, SdeConfig(ds=0.05, n_paths=3000, block_size=512,
                                                                       seed=4))
    assert not np.array_equal(serial.V, reseeded.V)
    assert serial.n_paths == 3000
    np.testing.assert_allclose(serial.W_c, 0.05)


def test_feynman_kac_guards():
    empty = ParticleEnsemble(1.0, np.zeros(3), np.zeros(3), np.zeros((2, 3)), np.zeros((2, 3)), np.zeros(2),
                             np.zeros(2, dtype=bool), np.zeros(2), np.zeros(2, dtype=int))
    with pytest.raises(ValueError):
        feynman_kac(empty, _gaussian_density(1.0))
    negative = ParticleEnsemble(1.0, np.zeros(3), np.zeros(3), np.zeros((2, 3)), np.zeros((2, 3)),
                                np.array([-1.0, 0.0]), np.ones(2, dtype=bool), np.zeros(2), np.array([0, 0]))
    with pytest.raises(ValueError):
        feynman_kac(negative, _gaussian_density(1.0))


def test_drop_exponent_is_a_lower_bound():
    model = FrozenCoefficients(np.eye(3), cbar=0.5)
    ensemble = simulate((), (0.3, 0.0, 0.0), 0.4, model, SdeConfig(ds=0.05, n_paths=2000, seed=2))
    full = feynman_kac(ensemble, _gaussian_density(1.0))
    dropped = feynman_kac(ensemble, _gaussian_density(1.0), drop_exponent=True)
    assert dropped.estimate == pytest.approx(full.dropped)
    assert full.estimate == pytest.approx(np.exp(0.2) * dropped.estimate)
    assert dropped.estimate < full.estimate


def test_mass_spreads_from_a_vacuum_core():
    L, x0, t = 4.0, 2.0, 0.25
    core = CorePrior((x0,), (0.0, 0.0, 0.0), 0.75, 1.0)
    model = FrozenCoefficients(np.eye(3), period=L, d_x=1)
    probes = [(t, (x0 + 0.5 * speed * t,), (speed, 0.0, 0.0)) for speed in (1.0, 1.3, 1.6)]
    probes.append((t, (x0,), (0.0, 0.0, 0.0)))
    results = core_spreading_experiment(core, probes, model, SdeConfig(ds=0.025, n_paths=4000, seed=1))
    assert len(results) == 4
    assert all(r.hits > 0 and not r.inconclusive for r in results)
    assert results[3].estimate > results[0].estimate > results[2].estimate > 0.0
    assert results[0].row()["x1"] == pytest.approx(x0 + 0.125)
    exponent = spreading_exponent(results, core)
    assert exponent is None or np.isfinite(exponent)
