import numpy as np
import pytest

from landau_base.oracles import jacobi_eigenvalues
from landau_base.spd_sqrt import spd_sqrt, symmetric_eigenvalues


def _random_spd(rng, n):
    B = rng.normal(size=(n, 3, 3))
    return np.einsum("nij,nkj->nik", B, B) + 0.01 * np.eye(3)


def test_square_root_of_a_batch(rng):
    M = _random_spd(rng, 200)
    sigma = spd_sqrt(M, eps=1e-3)
    np.testing.assert_allclose(sigma, np.swapaxes(sigma, -1, -2))
    np.testing.assert_allclose(sigma @ sigma, M + 1e-3 * np.eye(3), rtol=1e-9, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(sigma) > 0.0)


def test_single_matrix_and_identity():
    np.testing.assert_allclose(spd_sqrt(np.eye(3) * 4.0), 2.0 * np.eye(3), atol=1e-14)
    sigma = spd_sqrt(np.diag([9.0, 1.0, 0.25]))
    np.testing.assert_allclose(sigma, np.diag([3.0, 1.0, 0.5]), atol=1e-13)


def test_rank_one_matrix():
    u = np.array([1.0, -2.0, 0.5])
    M = np.outer(u, u)
    sigma = spd_sqrt(M)
    np.testing.assert_allclose(sigma @ sigma, M, atol=1e-6)


def test_invalid_input_is_rejected():
    with pytest.raises(ValueError):
        spd_sqrt(np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(ValueError):
        spd_sqrt(np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        spd_sqrt(np.eye(3), eps=-1.0)
    with pytest.raises(ValueError):
        spd_sqrt(np.eye(2))


def test_eigenvalues_agree_with_jacobi(rng):
    for M in _random_spd(rng, 20):
        np.testing.assert_allclose(symmetric_eigenvalues(M), jacobi_eigenvalues(M).value, rtol=1e-9, atol=1e-11)
