"""
Precomputed velocity-space kernels of the Landau coefficients.

The matrix kernel (I - w^ w^)|w|^(gamma+2) and the scalar kernel |w|^gamma are
tabulated at every lattice offset spanned by the velocity cube. The origin
offset, where both kernels are singular or non-smooth, carries a separate
weight chosen by `singular_rule`:

  "cell_average"  the exact average of the kernel over the origin cell,
  "lattice"       the analytically continued lattice sum correction, which
                  makes the point rule exact for the leading singular term.

Both values are stored; only the selected one enters the convolution.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import fft, special

from .phase_grid import PhaseGrid

logger = logging.getLogger(__name__)

A_GAMMA = 1.0
C_COULOMB = 8.0 * np.pi
A_COMPONENTS: Tuple[Tuple[int, int], ...] = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
SINGULAR_RULES = ("lattice", "cell_average")


def c_gamma(gamma: float) -> float:
    """Reaction constant paired with a_gamma = 1; the local constant 8*pi when gamma = -3."""
    if gamma == -3.0:
        return C_COULOMB
    return 2.0 * (gamma + 3.0)


def matrix_kernel(w: np.ndarray, gamma: float) -> np.ndarray:
    """Six upper components of (I - w^ w^)|w|^(gamma+2) for w of shape (..., 3), |w| > 0."""
    r2 = np.sum(w * w, axis=-1)
    r = np.sqrt(r2)
    outer_scale = r ** gamma
    diag_scale = r ** (gamma + 2.0)
    out = np.empty(w.shape[:-1] + (6,))
    for c, (i, j) in enumerate(A_COMPONENTS):
        out[..., c] = -w[..., i] * w[..., j] * outer_scale
        if i == j:
            out[..., c] += diag_scale
    return out


def scalar_kernel(w: np.ndarray, gamma: float) -> np.ndarray:
    return np.sqrt(np.sum(w * w, axis=-1)) ** gamma


def cube_power_average(p: float, h: float, n_quad: int = 32) -> float:
    """Average of |w|^p over the cube [-h/2, h/2]^3, for p > -3.

    Integrating radially along rays from the origin turns the volume integral
    into six identical face integrals of a smooth integrand:
        int_cube |w|^p = 6 (h/2)^(p+3) / (p+3) * int_[-1,1]^2 (1 + s^2 + t^2)^(p/2) ds dt.
    """
    if p <= -3.0:
        raise ValueError(f"|w|^{p} is not locally integrable in three dimensions")
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    s, t = np.meshgrid(nodes, nodes, indexing="ij")
    face = np.sum(np.outer(weights, weights) * (1.0 + s ** 2 + t ** 2) ** (p / 2.0))
    integral = 6.0 * (h / 2.0) ** (p + 3.0) / (p + 3.0) * face
    return integral / h ** 3


def _upper_gamma(a: float, x: np.ndarray) -> np.ndarray:
    """Non-regularized upper incomplete gamma Gamma(a, x) for any real a and x > 0."""
    if a > 0.0:
        return special.gammaincc(a, x) * special.gamma(a)
    if a == 0.0:
        return special.exp1(x)
    return (_upper_gamma(a + 1.0, x) - x ** a * np.exp(-x)) / a


@lru_cache(maxsize=32)
def lattice_zeta(s: float, cutoff: int = 5) -> float:
    """Epstein zeta sum' |m|^-s of the cubic lattice, analytically continued in s.

    Theta-function splitting at t = 1 gives
        pi^(-s/2) Gamma(s/2) Z(s) = sum' [Gamma(s/2, q) q^(-s/2) + Gamma((3-s)/2, q) q^(-(3-s)/2)]
                                    + 2/(s-3) - 2/s,        q = pi |m|^2,
    with both series converging like exp(-pi |m|^2).
    """
    if s == 3.0:
        raise ValueError("lattice zeta has a pole at s = 3")
    if s == 0.0:
        return -1.0
    m = np.arange(-cutoff, cutoff + 1)
    m1, m2, m3 = np.meshgrid(m, m, m, indexing="ij")
    r2 = (m1 ** 2 + m2 ** 2 + m3 ** 2).ravel()
    q = np.pi * r2[r2 > 0].astype(np.float64)
    terms = (_upper_gamma(s / 2.0, q) * q ** (-s / 2.0)
             + _upper_gamma((3.0 - s) / 2.0, q) * q ** (-(3.0 - s) / 2.0))
    bracket = np.sum(terms) + 2.0 / (s - 3.0) - 2.0 / s
    return float(bracket * np.pi ** (s / 2.0) * special.rgamma(s / 2.0))


def origin_cell_averages(gamma: float, h: float) -> Tuple[float, float]:
    """(matrix multiple of I, scalar) cell averages over the origin cell."""
    a0 = (2.0 / 3.0) * cube_power_average(gamma + 2.0, h)
    c0 = cube_power_average(gamma, h) if gamma > -3.0 else 0.0
    return a0, c0


def origin_lattice_weights(gamma: float, h: float) -> Tuple[float, float]:
    """Origin values that cancel the leading singular error of the point rule.

    sum'_m h^3 K(mh) g(mh) - int K g = Z_K h^(3+deg K) g(0) + ..., so the origin
    value -Z_K h^(deg K) removes that term. By cubic symmetry the matrix kernel's
    lattice sum is (2/3) Z(-(gamma+2)) I.
    """
    a0 = -(2.0 / 3.0) * lattice_zeta(-(gamma + 2.0)) * h ** (gamma + 2.0)
    c0 = -lattice_zeta(-gamma) * h ** gamma if gamma > -3.0 else 0.0
    return a0, c0


@dataclass(frozen=True, eq=False)
class KernelStencil:
    """Kernel values per lattice offset, with the origin weights and cached spectra."""
    gamma: float
    h_v: float
    n_v: int
    singular_rule: str
    a_weights: np.ndarray
    c_weights: np.ndarray
    a_origin_cell_average: float
    c_origin_cell_average: float
    a_origin_lattice: float
    c_origin_lattice: float
    spectra: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-(self.n_v - 1), self.n_v)

    @property
    def center(self) -> int:
        return self.n_v - 1

    @property
    def local_reaction(self) -> bool:
        """True for the Coulomb case, where cbar = 8*pi*f."""
        return self.gamma == -3.0

    @property
    def reaction_constant(self) -> float:
        return c_gamma(self.gamma)

    @property
    def padded_size(self) -> int:
        return 2 * self.n_v

    @property
    def a_origin(self) -> float:
        return self.a_origin_lattice if self.singular_rule == "lattice" else self.a_origin_cell_average

    @property
    def c_origin(self) -> float:
        return self.c_origin_lattice if self.singular_rule == "lattice" else self.c_origin_cell_average

    def matrix_at(self, offset: Tuple[int, int, int]) -> np.ndarray:
        """3x3 matrix kernel value at an integer offset."""
        idx = tuple(self.center + np.asarray(offset))
        comps = self.a_weights[(slice(None),) + idx]
        out = np.empty((3, 3))
        for c, (i, j) in enumerate(A_COMPONENTS):
            out[i, j] = out[j, i] = comps[c]
        return out


def precompute_stencil(grid: PhaseGrid, gamma: float, singular_rule: str = "lattice") -> KernelStencil:
    """Tabulate both kernels over all offsets of the velocity cube and transform them once."""
    if not -3.0 <= gamma < 0.0:
        raise ValueError(f"gamma must lie in [-3, 0), got {gamma}")
    if singular_rule not in SINGULAR_RULES:
        raise ValueError(f"singular_rule must be one of {SINGULAR_RULES}, got {singular_rule!r}")
    n = grid.n_v
    h = grid.h_v
    offsets = np.arange(-(n - 1), n)
    w = h * np.stack(np.meshgrid(offsets, offsets, offsets, indexing="ij"), axis=-1)
    center = (n - 1,) * 3
    w[center] = 1.0  # placeholder, overwritten below

    a_vals = np.moveaxis(matrix_kernel(w, gamma), -1, 0)
    if gamma > -3.0:
        c_vals = scalar_kernel(w, gamma)
    else:
        c_vals = np.zeros(w.shape[:-1])

    a_cell, c_cell = origin_cell_averages(gamma, h)
    a_lat, c_lat = origin_lattice_weights(gamma, h)
    a_origin = a_lat if singular_rule == "lattice" else a_cell
    c_origin = c_lat if singular_rule == "lattice" else c_cell
    for c, (i, j) in enumerate(A_COMPONENTS):
        a_vals[(c,) + center] = a_origin if i == j else 0.0
    c_vals[center] = c_origin

    size = 2 * n
    index = np.mod(offsets, size)
    padded = np.zeros((7, size, size, size))
    for c in range(6):
        padded[c][np.ix_(index, index, index)] = a_vals[c]
    padded[6][np.ix_(index, index, index)] = c_vals
    spectra = fft.rfftn(padded, axes=(1, 2, 3))

    logger.info("kernel stencil gamma=%g n_v=%d h_v=%.4g rule=%s: a0=%.6g c0=%.6g",
                gamma, n, h, singular_rule, a_origin, c_origin)
    for array in (a_vals, c_vals, spectra):
        array.setflags(write=False)
    return KernelStencil(float(gamma), h, n, singular_rule, a_vals, c_vals,
                         a_cell, c_cell, a_lat, c_lat, spectra)
