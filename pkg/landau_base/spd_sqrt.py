"""
Closed-form square roots of symmetric positive semidefinite 3x3 matrices, batched.
"""
import numpy as np

SYMMETRY_TOLERANCE = 1e-12
EIGEN_TOLERANCE = 1e-12


def symmetric_eigenvalues(M: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of symmetric (..., 3, 3) matrices by the trigonometric cubic solution."""
    M = np.asarray(M, dtype=np.float64)
    q = np.asarray(np.trace(M, axis1=-2, axis2=-1) / 3.0)
    off = M[..., 0, 1] ** 2 + M[..., 0, 2] ** 2 + M[..., 1, 2] ** 2
    p2 = (M[..., 0, 0] - q) ** 2 + (M[..., 1, 1] - q) ** 2 + (M[..., 2, 2] - q) ** 2 + 2.0 * off
    p = np.sqrt(p2 / 6.0)
    degenerate = p <= 1e-15 * np.maximum(np.abs(q), 1e-300)
    safe_p = np.where(degenerate, 1.0, p)
    shifted = (M - q[..., None, None] * np.eye(3)) / safe_p[..., None, None]
    r = np.clip(np.linalg.det(shifted) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    largest = q + 2.0 * p * np.cos(phi)
    smallest = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    middle = 3.0 * q - largest - smallest
    out = np.stack([smallest, middle, largest], axis=-1)
    return np.where(degenerate[..., None], q[..., None], out)


def spd_sqrt(M: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Symmetric sigma with sigma sigma = M + eps I, for one matrix or a batch.

    With s_i the square roots of the eigenvalues and i1, i2, i3 their
    elementary symmetric polynomials,
        sigma = (S + i2 I)^{-1} (i1 S + i3 I),     S = M + eps I,
    which needs no eigenvectors. Rank-one S falls back to S / sqrt(tr S).
    """
    M = np.asarray(M, dtype=np.float64)
    if M.shape[-2:] != (3, 3):
        raise ValueError(f"spd_sqrt expects (..., 3, 3) matrices, got shape {M.shape}")
    scale = np.maximum(np.max(np.abs(M), axis=(-2, -1)), 1.0)
    asymmetry = np.max(np.abs(M - np.swapaxes(M, -1, -2)), axis=(-2, -1))
    if np.any(asymmetry > SYMMETRY_TOLERANCE * scale):
        raise ValueError(f"matrix is not symmetric (asymmetry {float(np.max(asymmetry)):.3e})")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    S = 0.5 * (M + np.swapaxes(M, -1, -2)) + eps * np.eye(3)
    eigenvalues = symmetric_eigenvalues(S)
    top = np.maximum(eigenvalues[..., 2], 0.0)
    if np.any(eigenvalues[..., 0] < -EIGEN_TOLERANCE * np.maximum(top, 1.0)):
        raise ValueError(f"matrix has a negative eigenvalue {float(np.min(eigenvalues[..., 0])):.3e}")
    s = np.sqrt(np.clip(eigenvalues, 0.0, None))
    i1 = s.sum(axis=-1)
    i2 = s[..., 0] * s[..., 1] + s[..., 0] * s[..., 2] + s[..., 1] * s[..., 2]
    i3 = s[..., 0] * s[..., 1] * s[..., 2]

    identity = np.broadcast_to(np.eye(3), S.shape)
    low_rank = i2 <= 1e-14 * np.maximum(i1 * i1, 1e-300)
    safe_i2 = np.where(low_rank, 1.0, i2)
    lhs = S + safe_i2[..., None, None] * identity
    rhs = i1[..., None, None] * S + i3[..., None, None] * identity
    sigma = np.linalg.solve(lhs, rhs)
    if np.any(low_rank):
        trace = np.trace(S, axis1=-2, axis2=-1)
        rank_one = np.where(trace[..., None, None] > 0.0,
                            S / np.sqrt(np.where(trace > 0.0, trace, 1.0))[..., None, None], 0.0)
        sigma = np.where(low_rank[..., None, None], rank_one, sigma)
    return 0.5 * (sigma + np.swapaxes(sigma, -1, -2))
