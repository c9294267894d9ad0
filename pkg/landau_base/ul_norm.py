"""
Discrete uniformly local Sobolev norms.

The H^{k,l}_ul quantity is the sum over multi-indices (alpha, beta) with
|alpha| + |beta| <= k of

    sup_a  integral |phi(x - a) <v>^l  d_x^alpha d_v^beta g|^2 dx dv

with phi the window bump of phase_grid. The value is reported squared, as it
appears in that sum. Spatial axes absent from the grid carry no derivatives and
the window is integrated over them analytically.
"""
import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import fft, integrate

from .phase_grid import DistributionField, PhaseGrid, window_bump

logger = logging.getLogger(__name__)

MAX_ORDER = 4

# centered second-order stencils: offset -> coefficient (divide by h^order)
_STENCILS: Dict[int, Dict[int, float]] = {
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


@dataclass(frozen=True)
class UlNormReport:
    """Squared uniformly local norm of one field (and optionally of a trajectory)."""
    k: int
    l: int
    value_Hkl: float
    value_Yk: Optional[float] = None


def shift(values: np.ndarray, axis: int, offset: int, periodic: bool) -> np.ndarray:
    """Array whose entry i along `axis` is values[i + offset]; zero-filled when not periodic."""
    if offset == 0:
        return values
    if periodic:
        return np.roll(values, -offset, axis=axis)
    out = np.zeros_like(values)
    n = values.shape[axis]
    if abs(offset) >= n:
        return out
    dst = [slice(None)] * values.ndim
    src = [slice(None)] * values.ndim
    if offset > 0:
        dst[axis] = slice(0, n - offset)
        src[axis] = slice(offset, n)
    else:
        dst[axis] = slice(-offset, n)
        src[axis] = slice(0, n + offset)
    out[tuple(dst)] = values[tuple(src)]
    return out


def centered_difference(values: np.ndarray, axis: int, order: int, h: float, periodic: bool) -> np.ndarray:
    """Second-order centered approximation of the order-th derivative along one axis."""
    if order == 0:
        return values
    stencil = _STENCILS[order]
    out = np.zeros_like(values)
    for offset, coef in stencil.items():
        out += coef * shift(values, axis, offset, periodic)
    return out / h ** order


def multi_indices(n_vars: int, k: int):
    """All multi-indices over n_vars variables with total order <= k."""
    for total in range(k + 1):
        for combo in itertools.product(range(total + 1), repeat=n_vars):
            if sum(combo) == total:
                yield combo


@lru_cache(maxsize=64)
def _window_profile(d_x: int, L: float, n_x: int) -> np.ndarray:
    """phi^2 integrated over the axes without grid, sampled on the periodic node offsets."""
    h = L / n_x
    offsets = h * np.arange(n_x)
    offsets = offsets - L * np.round(offsets / L)
    images = int(np.ceil(2.0 / L)) + 1
    shifts = L * np.arange(-images, images + 1)

    if d_x == 1:
        def marginal(s: float) -> float:
            s = abs(s)
            if s >= 2.0:
                return 0.0
            # integral of phi(r)^2 over the plane at distance s, in polar form
            value, _ = integrate.quad(lambda r: window_bump(r) ** 2 * r, s, 2.0, limit=200)
            return 2.0 * np.pi * value

        profile = np.zeros(n_x)
        for i, s in enumerate(offsets):
            profile[i] = sum(marginal(s + shift_) for shift_ in shifts)
        return profile * h

    mesh = np.meshgrid(offsets, offsets, offsets, indexing="ij")
    profile = np.zeros((n_x,) * 3)
    for sx, sy, sz in itertools.product(shifts, shifts, shifts):
        r = np.sqrt((mesh[0] + sx) ** 2 + (mesh[1] + sy) ** 2 + (mesh[2] + sz) ** 2)
        profile += window_bump(r) ** 2
    return profile * h ** 3


@lru_cache(maxsize=1)
def window_l2_squared() -> float:
    """||phi||_2^2 over R^3."""
    value, _ = integrate.quad(lambda r: 4.0 * np.pi * r ** 2 * window_bump(r) ** 2, 0.0, 2.0,
                              points=[1.0], limit=200)
    return value


def _windowed_sup(grid: PhaseGrid, density: np.ndarray) -> float:
    """sup over window centers of the phi^2-weighted spatial integral of a spatial density."""
    if grid.d_x == 0:
        return window_l2_squared() * float(density)
    profile = _window_profile(grid.d_x, grid.L, grid.n_x)
    axes = tuple(range(grid.d_x))
    # phi^2 is even, so correlation equals circular convolution
    windowed = fft.irfftn(fft.rfftn(density, axes=axes) * fft.rfftn(profile, axes=axes),
                          s=density.shape, axes=axes)
    return max(float(windowed.max()), 0.0)


def ul_norm_values(grid: PhaseGrid, values: np.ndarray, k: int, l: int) -> float:
    """H^{k,l}_ul quantity of raw node values (signed values allowed)."""
    if k < 0 or k > MAX_ORDER:
        raise ValueError(f"derivative order k must lie in [0, {MAX_ORDER}], got {k}")
    if l < 0:
        raise ValueError(f"velocity weight order l must be nonnegative, got {l}")
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("ul_norm of a field containing NaN or Inf")

    weight = grid.broadcast_velocity(grid.japanese_bracket() ** (2 * l))
    v_axes = tuple(range(grid.d_x, grid.d_x + 3))
    n_vars = grid.d_x + 3
    total = 0.0
    for index in multi_indices(n_vars, k):
        derivative = values
        for axis, order in enumerate(index):
            if order == 0:
                continue
            periodic = axis < grid.d_x
            h = grid.h_x if periodic else grid.h_v
            derivative = centered_difference(derivative, axis, order, h, periodic)
        density = np.sum(weight * derivative ** 2, axis=v_axes) * grid.velocity_cell_volume
        total += _windowed_sup(grid, density)
    return total


def ul_norm(field: DistributionField, k: int, l: int) -> UlNormReport:
    """Discrete H^{k,l}_ul report of one snapshot."""
    return UlNormReport(k, l, ul_norm_values(field.grid, field.values, k, l))


def y_norm_values(grid: PhaseGrid, trajectory: Sequence[np.ndarray], times: Sequence[float], k: int) -> float:
    """Discrete Y^k_T = sqrt(sup_t H^{k,0}) + sqrt(sum_t dt H^{k,1}) of a trajectory of node values."""
    if len(trajectory) != len(times):
        raise ValueError("trajectory and times differ in length")
    if not trajectory:
        return 0.0
    sup_part = max(ul_norm_values(grid, values, k, 0) for values in trajectory)
    l2_part = 0.0
    for i in range(1, len(trajectory)):
        dt = times[i] - times[i - 1]
        l2_part += dt * ul_norm_values(grid, trajectory[i], k, 1)
    return float(np.sqrt(sup_part) + np.sqrt(l2_part))


def y_norm(fields: Sequence[DistributionField], k: int) -> UlNormReport:
    """Y^k report of a field trajectory; value_Hkl holds the final-time H^{k,0}."""
    values = [f.values for f in fields]
    times = [f.t for f in fields]
    grid = fields[0].grid
    return UlNormReport(k, 0, ul_norm_values(grid, values[-1], k, 0), y_norm_values(grid, values, times, k))


def richardson_order(spacings: Tuple[float, float, float], values: Tuple[float, float, float]) -> float:
    """Observed order from three grids with a common refinement ratio."""
    h1, h2, h3 = spacings
    q1, q2, q3 = values
    ratio = h1 / h2
    if not np.isclose(ratio, h2 / h3, rtol=1e-6):
        raise ValueError("Richardson check needs a constant refinement ratio")
    return float(np.log(abs(q1 - q2) / abs(q2 - q3)) / np.log(ratio))
