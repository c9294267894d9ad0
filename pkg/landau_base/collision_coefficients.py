"""
Landau coefficients abar[f] and cbar[f] by zero-padded FFT convolution in velocity.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import fft

from .kernel_stencil import A_COMPONENTS, A_GAMMA, KernelStencil, matrix_kernel, scalar_kernel
from .phase_grid import DistributionField, FieldInterpolator, PhaseGrid, make_grid
from .ul_norm import centered_difference

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-12
_CHUNK_BUDGET = 2 ** 23


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Symmetric 3x3 abar and scalar cbar on every phase node."""
    grid: PhaseGrid
    t: float
    gamma: float
    abar: np.ndarray
    cbar: np.ndarray
    cutoff_radius: Optional[float] = None

    def __post_init__(self):
        if self.abar.shape != self.grid.shape + (3, 3):
            raise ValueError(f"abar shape {self.abar.shape} does not match grid {self.grid.shape}")
        if self.cbar.shape != self.grid.shape:
            raise ValueError(f"cbar shape {self.cbar.shape} does not match grid {self.grid.shape}")

    def at(self, x_index: Tuple[int, ...] = ()) -> Tuple[np.ndarray, np.ndarray]:
        """Velocity slices (abar, cbar) at one spatial node."""
        return self.abar[tuple(x_index)], self.cbar[tuple(x_index)]

    def eigenvalue_bounds(self) -> Tuple[float, float]:
        """(smallest, largest) eigenvalue of abar over all nodes."""
        eig = np.linalg.eigvalsh(self.abar)
        return float(eig[..., 0].min()), float(eig[..., -1].max())

    def is_psd(self, tolerance: float = PSD_TOLERANCE) -> bool:
        low, high = self.eigenvalue_bounds()
        return low >= -tolerance * max(high, 0.0)

    def components(self) -> np.ndarray:
        """The six upper entries stacked on a trailing axis."""
        return np.stack([self.abar[..., i, j] for i, j in A_COMPONENTS], axis=-1)

    @staticmethod
    def zeros(grid: PhaseGrid, gamma: float, t: float = 0.0) -> "CoefficientField":
        return CoefficientField(grid, t, gamma, np.zeros(grid.shape + (3, 3)), np.zeros(grid.shape))


def _check_stencil(grid: PhaseGrid, stencil: KernelStencil) -> None:
    if stencil.n_v != grid.n_v or not np.isclose(stencil.h_v, grid.h_v, rtol=1e-14):
        raise ValueError(f"stencil (n_v={stencil.n_v}, h_v={stencil.h_v}) does not match "
                         f"grid (n_v={grid.n_v}, h_v={grid.h_v})")


def convolve_velocity(values: np.ndarray, stencil: KernelStencil, reaction_constant: Optional[float] = None,
                      workers: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """abar and cbar of raw node values whose last three axes are velocity.

    Values are processed in chunks of spatial nodes; each chunk is transformed
    once and multiplied against the seven cached kernel spectra.
    """
    n = stencil.n_v
    size = stencil.padded_size
    lead_shape = values.shape[:-3]
    flat = values.reshape((-1, n, n, n))
    n_nodes = flat.shape[0]
    abar = np.empty((n_nodes, n, n, n, 3, 3))
    conv_c = np.empty((n_nodes, n, n, n))
    cell = stencil.h_v ** 3
    chunk = max(1, _CHUNK_BUDGET // size ** 3)
    axes = (1, 2, 3)
    for start in range(0, n_nodes, chunk):
        block = flat[start:start + chunk]
        spectrum = fft.rfftn(block, s=(size,) * 3, axes=axes, workers=workers)
        for c, (i, j) in enumerate(A_COMPONENTS):
            conv = fft.irfftn(spectrum * stencil.spectra[c], s=(size,) * 3, axes=axes, workers=workers)
            abar[start:start + chunk, ..., i, j] = A_GAMMA * cell * conv[:, :n, :n, :n]
            if i != j:
                abar[start:start + chunk, ..., j, i] = abar[start:start + chunk, ..., i, j]
        if not stencil.local_reaction:
            conv = fft.irfftn(spectrum * stencil.spectra[6], s=(size,) * 3, axes=axes, workers=workers)
            conv_c[start:start + chunk] = cell * conv[:, :n, :n, :n]
    if stencil.local_reaction:
        conv_c = flat.copy()
    constant = stencil.reaction_constant if reaction_constant is None else reaction_constant
    cbar = constant * conv_c
    return abar.reshape(lead_shape + (n, n, n, 3, 3)), cbar.reshape(lead_shape + (n, n, n))


def compute_coefficients(f: DistributionField, stencil: KernelStencil,
                         workers: Optional[int] = None) -> CoefficientField:
    """abar = a_gamma (kernel * f), cbar = c_gamma (|w|^gamma * f), per spatial node."""
    if not f.is_physical:
        raise ValueError("coefficients must be computed from a physical-frame density")
    if f.gamma != stencil.gamma:
        raise ValueError(f"field gamma {f.gamma} does not match stencil gamma {stencil.gamma}")
    _check_stencil(f.grid, stencil)
    abar, cbar = convolve_velocity(f.values, stencil, workers=workers)
    # FFT round-off can leave tiny negatives where f vanishes
    np.maximum(cbar, 0.0, out=cbar)
    return CoefficientField(f.grid, f.t, f.gamma, abar, cbar)


def coefficients_from_values(grid: PhaseGrid, t: float, gamma: float, values: np.ndarray,
                             stencil: KernelStencil, workers: Optional[int] = None) -> CoefficientField:
    """Coefficients of raw nonnegative node values (used inside the solver loop)."""
    _check_stencil(grid, stencil)
    peak = float(values.max()) if values.size else 0.0
    if values.size and values.min() < -1e-12 * max(peak, 1e-300):
        raise ValueError(f"negative density {values.min():.3e} below tolerance")
    abar, cbar = convolve_velocity(np.maximum(values, 0.0), stencil, workers=workers)
    np.maximum(cbar, 0.0, out=cbar)
    return CoefficientField(grid, t, gamma, abar, cbar)


def coefficients_at(f: DistributionField, stencil: KernelStencil, v_points: np.ndarray,
                    x_index: Tuple[int, ...] = (), chunk: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """abar (N, 3, 3) and cbar (N,) at arbitrary velocities by direct summation over nodes."""
    _check_stencil(f.grid, stencil)
    v_points = np.atleast_2d(np.asarray(v_points, dtype=np.float64))
    values = f.values[tuple(x_index)].ravel()
    nodes = f.grid.velocity_points()
    support = values > 0.0
    values = values[support]
    nodes = nodes[support]
    h = f.grid.h_v
    cell = h ** 3
    n_points = v_points.shape[0]
    abar = np.zeros((n_points, 3, 3))
    conv_c = np.zeros(n_points)
    for start in range(0, n_points, chunk):
        points = v_points[start:start + chunk]
        w = points[:, None, :] - nodes[None, :, :]
        singular = np.sqrt(np.sum(w * w, axis=-1)) < 1e-9 * h
        w[singular] = 1.0
        a = matrix_kernel(w, stencil.gamma)
        a[singular] = [stencil.a_origin, 0.0, 0.0, stencil.a_origin, 0.0, stencil.a_origin]
        comps = cell * np.einsum("pnc,n->pc", a, values)
        for c, (i, j) in enumerate(A_COMPONENTS):
            abar[start:start + chunk, i, j] = comps[:, c]
            abar[start:start + chunk, j, i] = comps[:, c]
        if not stencil.local_reaction:
            c_kernel = scalar_kernel(w, stencil.gamma)
            c_kernel[singular] = stencil.c_origin
            conv_c[start:start + chunk] = cell * c_kernel @ values
    if stencil.local_reaction:
        local_grid = make_grid(0, None, None, f.grid.v_max, f.grid.n_v)
        interpolant = FieldInterpolator(local_grid, f.values[tuple(x_index)], outside="zero")
        conv_c = interpolant(None, v_points)
    return A_GAMMA * abar, stencil.reaction_constant * conv_c


def quadrature_oracle(f: DistributionField, x_index: Tuple[int, ...], v: Sequence[float],
                      stencil: KernelStencil) -> Tuple[np.ndarray, float]:
    """abar and cbar at one phase point by direct O(n_v^3) summation."""
    abar, cbar = coefficients_at(f, stencil, np.asarray(v, dtype=np.float64)[None, :], x_index)
    return abar[0], float(cbar[0])


def nondivergence_form(grid: PhaseGrid, matrix: np.ndarray, drift: Optional[np.ndarray],
                       reaction: np.ndarray, values: np.ndarray) -> np.ndarray:
    """tr(matrix D_v^2 u) + drift . grad_v u + reaction u by centered differences, zero outside the cube."""
    h = grid.h_v
    v0 = grid.d_x
    grad = [centered_difference(values, v0 + j, 1, h, periodic=False) for j in range(3)]
    out = reaction * values
    for i in range(3):
        if drift is not None:
            out = out + drift[..., i] * grad[i]
        for j in range(3):
            if i == j:
                second = centered_difference(values, v0 + i, 2, h, periodic=False)
            else:
                second = centered_difference(grad[j], v0 + i, 1, h, periodic=False)
            out = out + matrix[..., i, j] * second
    return out


@dataclass(frozen=True)
class ConsistencyResult:
    """Max-norm gap between the nondivergence and divergence forms of the collision term."""
    residual: float
    scale: float
    h_v: float
    reaction_constant: float


def divergence_form_consistency(f: DistributionField, stencil: KernelStencil,
                                reaction_constant: Optional[float] = None,
                                margin: int = 3) -> ConsistencyResult:
    """Compare tr(abar D^2 f) + cbar f with div(abar grad f - bbar f), bbar_j = sum_i d_i abar_ij.

    Derivatives are centered differences with zero data outside the cube; the
    gap is measured on nodes at least `margin` cells away from the faces.
    """
    _check_stencil(f.grid, stencil)
    grid = f.grid
    constant = stencil.reaction_constant if reaction_constant is None else reaction_constant
    abar, cbar = convolve_velocity(f.values, stencil, reaction_constant=constant)
    values = f.values
    h = grid.h_v
    v0 = grid.d_x

    def d(array, axis):
        return centered_difference(array, v0 + axis, 1, h, periodic=False)

    grad = [d(values, j) for j in range(3)]
    nondivergence = nondivergence_form(grid, abar, None, cbar, values)

    divergence = np.zeros_like(values)
    for i in range(3):
        drift = sum(d(abar[..., i, j], j) for j in range(3))
        flux = sum(abar[..., i, j] * grad[j] for j in range(3)) - drift * values
        divergence = divergence + d(flux, i)

    interior = [slice(None)] * grid.d_x + [slice(margin, grid.n_v - margin)] * 3
    gap = np.abs(nondivergence - divergence)[tuple(interior)]
    scale = float(np.abs(nondivergence).max()) if nondivergence.size else 0.0
    return ConsistencyResult(float(gap.max()) if gap.size else 0.0, scale, h, constant)


def observed_order(spacings: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    slope, _ = np.polyfit(np.log(np.asarray(spacings)), np.log(np.asarray(errors)), 1)
    return float(slope)
