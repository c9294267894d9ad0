"""
Structural diagnostics of a solution: well-distributedness, ellipticity of
abar above a mass core, and stretched-exponential tail fits.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.optimize import least_squares

from .collision_coefficients import coefficients_at
from .kernel_stencil import KernelStencil
from .phase_grid import DistributionField, PhaseGrid
from .sde import CorePrior

logger = logging.getLogger(__name__)

TAIL_FLOOR = 1e-11


def _ball_footprint(radius_cells: float, dims: int) -> np.ndarray:
    k = int(np.floor(radius_cells))
    axis = np.arange(-k, k + 1)
    mesh = np.meshgrid(*([axis] * dims), indexing="ij")
    return sum(m ** 2 for m in mesh) <= radius_cells ** 2 + 1e-9


@dataclass
class WellDistributedReport:
    holds: bool
    R: float
    delta: float
    r: float
    witness_x: np.ndarray
    witness_v: np.ndarray
    failing: List[Tuple[float, ...]] = field(default_factory=list)

    def print_details(self):
        status = "holds" if self.holds else f"fails at {len(self.failing)} spatial nodes"
        print(f"well-distributed (R={self.R:g}, delta={self.delta:g}, r={self.r:g}): {status}")


def well_distributed_check(f: DistributionField, R: float, delta: float, r: float) -> WellDistributedReport:
    """Search, for every spatial node x, for x_m in B_R(x) and v_m in B_R(0) with f >= delta on
    every node of B_r(x_m) x B_r(v_m).

    Witnesses are nodes; the nearest admissible x_m (periodic distance) is reported.
    """
    grid = f.grid
    if not 0 < r <= R:
        raise ValueError(f"need 0 < r <= R, got r={r}, R={R}")
    if grid.h_v > r / 3.0 or (grid.d_x and grid.h_x > r / 3.0):
        raise ValueError(f"grid does not resolve r = {r}: need spacing <= r/3 "
                         f"(h_v={grid.h_v:.4g}, h_x={grid.h_x})")
    if grid.d_x and 2.0 * R > grid.L:
        logger.warning("R = %g exceeds half the torus (L = %g); B_R(x) wraps onto itself", R, grid.L)
    d_x = grid.d_x
    values = f.values

    v_foot = _ball_footprint(r / grid.h_v, 3)
    v_foot = v_foot.reshape((1,) * d_x + v_foot.shape)
    modes = ["wrap"] * d_x + ["constant"] * 3
    lowest = ndimage.minimum_filter(values, footprint=v_foot, mode=modes, cval=0.0)
    if d_x:
        x_foot = _ball_footprint(r / grid.h_x, d_x)
        x_foot = x_foot.reshape(x_foot.shape + (1, 1, 1))
        lowest = ndimage.minimum_filter(lowest, footprint=x_foot, mode=modes, cval=0.0)

    centers = grid.speed() <= R
    covered = (lowest >= delta) & grid.broadcast_velocity(centers)
    v_axes = tuple(range(d_x, d_x + 3))
    good = np.any(covered, axis=v_axes)
    best_v = np.argmax(np.where(covered, lowest, -np.inf).reshape(grid.spatial_shape + (-1,)), axis=-1)
    v_points = grid.velocity_points()

    witness_x = np.full(grid.spatial_shape + (d_x,), np.nan)
    witness_v = np.full(grid.spatial_shape + (3,), np.nan)
    found = np.zeros(grid.spatial_shape, dtype=bool)
    if d_x == 0:
        if good:
            found = np.asarray(True)
            witness_v[...] = v_points[int(best_v)]
    else:
        radius = R / grid.h_x
        k = min(int(np.floor(radius)), grid.n_x // 2)
        axis = np.arange(-k, k + 1)
        offsets = np.stack(np.meshgrid(*([axis] * d_x), indexing="ij"), axis=-1).reshape(-1, d_x)
        lengths = np.sqrt(np.sum(offsets ** 2, axis=-1))
        within = lengths <= radius + 1e-9
        offsets = offsets[within][np.argsort(lengths[within], kind="stable")]
        nodes = grid.spatial_axis()
        index_grid = np.stack(np.meshgrid(*([np.arange(grid.n_x)] * d_x), indexing="ij"), axis=-1)
        for offset in offsets:
            shifted_good = np.roll(good, shift=tuple(-offset), axis=tuple(range(d_x)))
            new = shifted_good & ~found
            if not np.any(new):
                continue
            target = np.mod(index_grid[new] + offset, grid.n_x)
            witness_x[new] = nodes[target]
            witness_v[new] = v_points[best_v[tuple(target.T)]]
            found |= new
            if found.all():
                break

    failing = []
    for index in grid.spatial_indices():
        if not bool(np.asarray(found)[index]):
            failing.append(tuple(float(grid.spatial_axis()[i]) for i in index))
    holds = not failing
    logger.info("well-distributed check R=%g delta=%g r=%g: %s", R, delta, r,
                "holds" if holds else f"{len(failing)} failing nodes")
    return WellDistributedReport(holds, R, delta, r, witness_x, witness_v, failing)


@dataclass(frozen=True)
class EllipticityReport:
    """Power-law fits of the smallest eigenvalue of abar (all directions and directions normal to v)."""
    c_fit: float
    slope_all: float
    c_fit_perp: float
    slope_perp: float
    r2_all: float
    r2_perp: float
    v_range: Tuple[float, float]
    lambda0: float
    speeds: np.ndarray = field(repr=False)
    min_all: np.ndarray = field(repr=False)
    min_perp: np.ndarray = field(repr=False)

    def passes(self, gamma: float, tolerance: float = 0.3) -> bool:
        return (self.slope_all >= gamma - tolerance and self.slope_perp >= gamma + 2.0 - tolerance
                and self.c_fit > 0.0 and self.c_fit_perp > 0.0)

    def rows(self):
        for s, a, p in zip(self.speeds, self.min_all, self.min_perp):
            yield {"speed": float(s), "min_eig": float(a), "min_eig_perp": float(p)}

    def print_details(self):
        print(f"ellipticity over |v| in [{self.v_range[0]:.3g}, {self.v_range[1]:.3g}]: "
              f"slope_all={self.slope_all:.3f} (R2 {self.r2_all:.4f}), "
              f"slope_perp={self.slope_perp:.3f} (R2 {self.r2_perp:.4f}), lambda0={self.lambda0:.4g}")


def _power_fit(speeds: np.ndarray, values: np.ndarray) -> Tuple[float, float, float]:
    """(constant, slope, R^2) of log(values) = log(constant) + slope log(speeds)."""
    x = np.log(speeds)
    y = np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    spread = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(residual ** 2) / spread if spread > 0 else 1.0
    return float(np.exp(intercept)), float(slope), float(r2)


def perpendicular_minimum(abar: np.ndarray, v: np.ndarray) -> np.ndarray:
    """min over unit e normal to v of e . abar e, for batches (N, 3, 3) and (N, 3)."""
    v_hat = v / np.linalg.norm(v, axis=-1, keepdims=True)
    seed = np.where(np.abs(v_hat[:, :1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    e1 = np.cross(v_hat, seed)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(v_hat, e1)
    basis = np.stack([e1, e2], axis=-1)
    restricted = np.einsum("nia,nij,njb->nab", basis, abar, basis)
    return np.linalg.eigvalsh(restricted)[:, 0]


def default_ellipticity_samples(core: CorePrior, v_range: Tuple[float, float] = (2.0, 16.0),
                                n: int = 12) -> np.ndarray:
    direction = np.array([1.0, 2.0, 3.0]) / np.sqrt(14.0)
    speeds = np.geomspace(v_range[0], v_range[1], n)
    return np.asarray(core.v0) + speeds[:, None] * direction


def ellipticity_verify(f: DistributionField, stencil: KernelStencil, core: CorePrior,
                       v_samples: Optional[np.ndarray] = None, min_decades: float = 0.5,
                       check_core: bool = True) -> EllipticityReport:
    """Fit the smallest eigenvalue of abar[f] at the sample velocities against |v - v0|.

    abar is evaluated by direct summation, so samples may lie outside the
    velocity cube. The minima over directions are exact eigenvalues.
    """
    grid = f.grid
    x_index = _nearest_spatial_index(grid, core.x0)
    if check_core:
        _check_core(f, core, x_index)
    if v_samples is None:
        v_samples = default_ellipticity_samples(core)
    v_samples = np.atleast_2d(np.asarray(v_samples, dtype=np.float64))
    speeds = np.linalg.norm(v_samples - np.asarray(core.v0), axis=-1)
    low, high = float(speeds.min()), float(speeds.max())
    if low <= 0.0 or np.log10(high / low) < min_decades:
        raise ValueError(f"ellipticity fit window [{low:.3g}, {high:.3g}] spans fewer than {min_decades} decades")

    abar, _ = coefficients_at(f, stencil, v_samples, x_index)
    min_all = np.linalg.eigvalsh(abar)[:, 0]
    min_perp = perpendicular_minimum(abar, v_samples - np.asarray(core.v0))
    if np.any(min_all <= 0.0) or np.any(min_perp <= 0.0):
        raise ValueError("abar is not positive definite at every sample; the core carries no mass")
    c_all, slope_all, r2_all = _power_fit(speeds, min_all)
    c_perp, slope_perp, r2_perp = _power_fit(speeds, min_perp)
    bracket = np.sqrt(1.0 + np.sum(v_samples ** 2, axis=-1))
    lambda0 = float(np.sqrt(np.min(min_all / bracket ** stencil.gamma)))
    report = EllipticityReport(c_all, slope_all, c_perp, slope_perp, r2_all, r2_perp, (low, high), lambda0,
                               speeds, min_all, min_perp)
    logger.info("ellipticity slopes: all %.3f, perp %.3f", slope_all, slope_perp)
    return report


def _nearest_spatial_index(grid: PhaseGrid, x0: Sequence[float]) -> Tuple[int, ...]:
    if grid.d_x == 0:
        return ()
    x0 = np.asarray(x0, dtype=np.float64)[:grid.d_x]
    return tuple(int(i) % grid.n_x for i in np.round(np.mod(x0, grid.L) / grid.h_x))


def _check_core(f: DistributionField, core: CorePrior, x_index: Tuple[int, ...]) -> None:
    grid = f.grid
    speed = np.sqrt(sum((c - v0) ** 2 for c, v0 in zip(grid.velocity_mesh(), core.v0)))
    inside = speed < core.r0
    if not np.any(inside):
        raise ValueError(f"core radius {core.r0} holds no velocity node")
    low = float(f.values[x_index][inside].min())
    if low < core.delta0 * (1.0 - 1e-12):
        raise ValueError(f"f falls to {low:.4g} inside the core, below delta0 = {core.delta0}")


@dataclass(frozen=True)
class TailFit:
    """log f = log nu - rho |v|^beta fitted on a radial shell."""
    nu: float
    rho: float
    beta: float
    window: Tuple[float, float]
    r2: float
    n_points: int
    t: float = 0.0

    def row(self) -> dict:
        return {"t": self.t, "nu": self.nu, "rho": self.rho, "beta": self.beta, "v_low": self.window[0],
                "v_high": self.window[1], "r2": self.r2, "n_points": self.n_points}

    def envelope(self, speed: np.ndarray) -> np.ndarray:
        return self.nu * np.exp(-self.rho * np.asarray(speed) ** self.beta)


def fit_stretched_exponential(speeds: np.ndarray, values: np.ndarray, min_decades: float = 0.5,
                              t: float = 0.0) -> TailFit:
    """Joint (nu, rho, beta) least-squares fit of log(values) over positive samples."""
    speeds = np.asarray(speeds, dtype=np.float64).ravel()
    values = np.asarray(values, dtype=np.float64).ravel()
    if speeds.size < 4:
        raise ValueError(f"tail fit needs at least 4 samples, got {speeds.size}")
    if np.any(values <= 0.0):
        raise ValueError("tail fit window contains nonpositive values")
    low, high = float(speeds.min()), float(speeds.max())
    if low <= 0.0 or np.log10(high / low) < min_decades:
        raise ValueError(f"tail fit window [{low:.3g}, {high:.3g}] is shorter than {min_decades} decades")
    log_f = np.log(values)

    # start from the linear fit of log(-log(f / nu)) against log|v|
    log_nu0 = float(log_f.max()) + 1.0
    slope, intercept = np.polyfit(np.log(speeds), np.log(log_nu0 - log_f), 1)
    x0 = np.array([log_nu0, intercept, np.clip(slope, 0.2, 19.0)])

    def residual(p):
        return p[0] - np.exp(p[1]) * speeds ** p[2] - log_f

    fit = least_squares(residual, x0, bounds=([-np.inf, -np.inf, 0.1], [np.inf, np.inf, 20.0]),
                        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    log_nu, log_rho, beta = fit.x
    spread = np.sum((log_f - log_f.mean()) ** 2)
    r2 = 1.0 - np.sum(fit.fun ** 2) / spread if spread > 0 else 1.0
    return TailFit(float(np.exp(log_nu)), float(np.exp(log_rho)), float(beta), (low, high), float(r2),
                   int(speeds.size), t)


def fit_tail(f: DistributionField, x_index: Tuple[int, ...] = (), window: Tuple[float, float] = (2.5, 5.0),
             floor: float = TAIL_FLOOR, min_decades: float = 0.5) -> TailFit:
    """Stretched-exponential fit of f(t, x, .) on the shell window[0] <= |v| <= window[1].

    Nodes below floor * max f are discarded so clamp-level noise is not fitted.
    """
    grid = f.grid
    slice_ = f.values[tuple(x_index)]
    speed = grid.speed()
    shell = (speed >= window[0]) & (speed <= window[1])
    if not np.any(shell):
        raise ValueError(f"tail window {window} holds no velocity node")
    peak = float(slice_.max())
    if peak <= 0.0:
        raise ValueError("tail fit of a vanishing density")
    keep = shell & (slice_ > floor * peak)
    if not np.any(keep):
        raise ValueError(f"no value in the tail window {window} exceeds the floor {floor * peak:.3e}")
    fit = fit_stretched_exponential(speed[keep], slice_[keep], min_decades, t=f.t)
    logger.info("tail fit t=%.4g: beta=%.3f rho=%.3g nu=%.3g on |v| in [%.3g, %.3g]", f.t, fit.beta, fit.rho,
                fit.nu, *fit.window)
    return fit
