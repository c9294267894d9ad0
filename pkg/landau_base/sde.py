"""
Stochastic verifier: kinetic SDE paths and Feynman-Kac estimates.

Paths solve, backwards from a query point (t, x, v),
    dV_s = sqrt(2) sigma(t - s, X_s, V_s) dW_s,   dX_s = -V_s ds,
with sigma sigma = abar_R + eps I, so that
    f(t, x, v) = E[ exp(int_0^t cbar(t - s, X_s, V_s) ds) f_in(X_t, V_t) ]
solves d_t f + v . grad_x f = tr((abar_R + eps I) D_v^2 f) + cbar f.
With `landau_scaling` off the sqrt(2) is dropped and sigma drives a standard
Brownian motion.
"""
import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .collision_coefficients import CoefficientField
from .kernel_stencil import A_COMPONENTS
from .gaussian_generator import GaussianGenerator
from .phase_grid import DistributionField, FieldInterpolator, PhaseGrid, ball_cutoff
from .spd_sqrt import spd_sqrt, symmetric_eigenvalues

logger = logging.getLogger(__name__)

InitialDatum = Union[DistributionField, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class SdeConfig:
    R_cut: float = 4.0
    eps: float = 1e-3
    ds: float = 0.01
    n_paths: int = 10000
    seed: int = 0
    antithetic: bool = True
    block_size: int = 4096
    landau_scaling: bool = True
    threads: Optional[int] = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.ds > 0:
            raise ValueError(f"ds must be positive, got {self.ds}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be positive, got {self.n_paths}")
        if not self.R_cut >= 1:
            raise ValueError(f"R_cut must be at least 1, got {self.R_cut}")
        if self.block_size < 2 or (self.antithetic and self.block_size % 2):
            raise ValueError(f"block_size must be an even integer >= 2, got {self.block_size}")
        if self.antithetic and self.n_paths % 2:
            logger.info("antithetic pairs: rounding n_paths up from %d to %d", self.n_paths, self.n_paths + 1)
            object.__setattr__(self, "n_paths", self.n_paths + 1)


@dataclass(frozen=True)
class CorePrior:
    """delta0 on B_r0(x0) x B_r0(v0)."""
    x0: Tuple[float, ...]
    v0: Tuple[float, float, float]
    r0: float
    delta0: float

    def __post_init__(self):
        if not self.r0 > 0 or not self.delta0 > 0:
            raise ValueError("core radius and height must be positive")

    def indicator(self, x: np.ndarray, v: np.ndarray, L: Optional[float] = None) -> np.ndarray:
        """delta0 * 1_core at points x (N, >= len(x0)) and v (N, 3); x distances wrap with period L."""
        v = np.atleast_2d(v)
        inside = np.sum((v - np.asarray(self.v0)) ** 2, axis=-1) < self.r0 ** 2
        d_x = len(self.x0)
        if d_x:
            dx = np.atleast_2d(x)[:, :d_x] - np.asarray(self.x0)
            if L is not None:
                dx = dx - L * np.round(dx / L)
            inside &= np.sum(dx ** 2, axis=-1) < self.r0 ** 2
        return self.delta0 * inside

    def as_field(self, grid: PhaseGrid, gamma: float, smoothing: float = 0.0) -> DistributionField:
        """The core sampled on a grid, optionally softened over `smoothing` cells at its edge."""
        speed = np.sqrt(sum((c - v0) ** 2 for c, v0 in zip(grid.velocity_mesh(), self.v0)))
        radius2 = grid.broadcast_velocity(speed ** 2)
        if grid.d_x:
            offsets = np.stack(np.meshgrid(*([grid.spatial_axis()] * grid.d_x), indexing="ij"), axis=-1)
            dx = offsets - np.asarray(self.x0[:grid.d_x])
            dx = dx - grid.L * np.round(dx / grid.L)
            radius2 = radius2 + np.sum(dx ** 2, axis=-1).reshape(grid.spatial_shape + (1, 1, 1))
        radius = np.sqrt(radius2)
        if smoothing > 0.0:
            width = smoothing * grid.h_v
            profile = np.clip((self.r0 - radius) / width + 0.5, 0.0, 1.0)
        else:
            profile = (radius < self.r0).astype(np.float64)
        return DistributionField(grid, 0.0, gamma, self.delta0 * profile)


class CoefficientModel(ABC):
    """sigma and cbar as functions of physical time, position and velocity."""

    @abstractmethod
    def sigma(self, t: float, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """(N, 3, 3) diffusion matrices."""
        pass

    @abstractmethod
    def cbar(self, t: float, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """(N,) reaction rates."""
        pass

    @property
    def period(self) -> Optional[float]:
        return None

    @property
    def d_x(self) -> int:
        return 0


class FrozenCoefficients(CoefficientModel):
    """Constant sigma and cbar, for benchmarks."""

    def __init__(self, sigma: np.ndarray, cbar: float = 0.0, period: Optional[float] = None, d_x: int = 0):
        self._sigma = np.asarray(sigma, dtype=np.float64)
        self._cbar = float(cbar)
        self._period = period
        self._d_x = d_x

    def sigma(self, t, x, v):
        return np.broadcast_to(self._sigma, (v.shape[0], 3, 3))

    def cbar(self, t, x, v):
        return np.full(v.shape[0], self._cbar)

    @property
    def period(self):
        return self._period

    @property
    def d_x(self):
        return self._d_x


def cutoff_matrix(abar: np.ndarray, v: np.ndarray, R_cut: float) -> np.ndarray:
    """chi(v / R) abar + (1 - chi(v / R)) I."""
    chi = ball_cutoff(np.sqrt(np.sum(v * v, axis=-1)) / R_cut)[..., None, None]
    return chi * abar + (1.0 - chi) * np.eye(3)


def cutoff_coefficients(coeffs: CoefficientField, R_cut: float) -> CoefficientField:
    """abar_R on the grid nodes; cbar unchanged."""
    if not R_cut >= 1:
        raise ValueError(f"R_cut must be at least 1, got {R_cut}")
    grid = coeffs.grid
    v = grid.broadcast_velocity(np.stack(grid.velocity_mesh(), axis=-1))
    abar = cutoff_matrix(coeffs.abar, v, R_cut)
    return CoefficientField(grid, coeffs.t, coeffs.gamma, abar, coeffs.cbar.copy(), cutoff_radius=R_cut)


class SnapshotCoefficients(CoefficientModel):
    """(sigma_{R,eps}, cbar) from deterministic snapshots, linear in time and multilinear in (x, v).

    abar is extended by its face values beyond the cube before the cutoff, so
    abar_R is defined everywhere and equals I for |v| >= 2 R; cbar is zero
    beyond the cube.
    """

    def __init__(self, snapshots: Sequence[CoefficientField], R_cut: float, eps: float):
        if not snapshots:
            raise ValueError("SnapshotCoefficients needs at least one snapshot")
        self.grid = snapshots[0].grid
        self.times = np.array([c.t for c in snapshots])
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must increase")
        self.R_cut = R_cut
        self.eps = eps
        self._abar = [FieldInterpolator(self.grid, c.components(), outside="edge") for c in snapshots]
        self._cbar = [FieldInterpolator(self.grid, c.cbar, outside="zero") for c in snapshots]

    @property
    def period(self):
        return self.grid.L

    @property
    def d_x(self):
        return self.grid.d_x

    def _bracket(self, t: float):
        if len(self.times) == 1 or t <= self.times[0]:
            return 0, 0, 0.0
        if t >= self.times[-1]:
            last = len(self.times) - 1
            return last, last, 0.0
        upper = int(np.searchsorted(self.times, t, side="right"))
        lower = upper - 1
        theta = (t - self.times[lower]) / (self.times[upper] - self.times[lower])
        return lower, upper, theta

    def abar(self, t: float, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        lower, upper, theta = self._bracket(t)
        comps = (1.0 - theta) * self._abar[lower](x, v)
        if theta:
            comps = comps + theta * self._abar[upper](x, v)
        out = np.empty((v.shape[0], 3, 3))
        for c, (i, j) in enumerate(A_COMPONENTS):
            out[:, i, j] = comps[:, c]
            out[:, j, i] = comps[:, c]
        return cutoff_matrix(out, v, self.R_cut)

    def sigma(self, t, x, v):
        return spd_sqrt(self.abar(t, x, v), self.eps)

    def cbar(self, t, x, v):
        lower, upper, theta = self._bracket(t)
        values = (1.0 - theta) * self._cbar[lower](x, v)
        if theta:
            values = values + theta * self._cbar[upper](x, v)
        return np.maximum(values, 0.0)


@dataclass
class ParticleEnsemble:
    """End states of a batch of backward paths started at one phase point."""
    t: float
    x: np.ndarray
    v: np.ndarray
    X: np.ndarray
    V: np.ndarray
    W_c: np.ndarray
    alive: np.ndarray
    max_speed: np.ndarray
    pair: np.ndarray
    seed: int = 0

    @property
    def n_paths(self) -> int:
        return self.X.shape[0]

    def dead_count(self) -> int:
        return int(np.count_nonzero(~self.alive))


def _simulate_block(args) -> Tuple[np.ndarray, ...]:
    x, v, t, model, cfg, generator, block, count, stream = args
    rng = generator.stream(block, stream)
    n = max(1, int(round(t / cfg.ds)))
    ds = t / n
    scale = np.sqrt(2.0 * ds) if cfg.landau_scaling else np.sqrt(ds)
    d_x = model.d_x
    period = model.period

    X = np.tile(np.asarray(x, dtype=np.float64), (count, 1))
    V = np.tile(np.asarray(v, dtype=np.float64), (count, 1))
    W = np.zeros(count)
    alive = np.ones(count, dtype=bool)
    max_speed = np.sqrt(np.sum(V * V, axis=-1))
    for i in range(n):
        s_phys = t - i * ds
        sigma = model.sigma(s_phys, X, V)
        W += model.cbar(s_phys, X, V) * ds
        xi = generator.normals(rng, count, 3, cfg.antithetic)
        V_new = V + scale * np.einsum("nij,nj->ni", sigma, xi)
        X = X - 0.5 * (V + V_new) * ds
        if d_x and period is not None:
            X[:, :d_x] = np.mod(X[:, :d_x], period)
        V = V_new
        bad = ~(np.all(np.isfinite(X), axis=1) & np.all(np.isfinite(V), axis=1) & np.isfinite(W))
        if np.any(bad):
            alive &= ~bad
            X[bad] = np.asarray(x, dtype=np.float64)
            V[bad] = np.asarray(v, dtype=np.float64)
            W[bad] = 0.0
        max_speed = np.maximum(max_speed, np.sqrt(np.sum(V * V, axis=-1)))
    return X, V, W, alive, max_speed


def simulate(x: Sequence[float], v: Sequence[float], t: float, model: CoefficientModel, cfg: SdeConfig,
             stream: int = 0) -> ParticleEnsemble:
    """Euler-Maruyama paths from (t, x, v) back to time 0.

    Paths run in blocks of cfg.block_size; block b draws from the Philox
    stream (seed, stream, b), so the ensemble does not depend on threading.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    x = np.zeros(3) if len(x) == 0 else np.pad(np.asarray(x, dtype=np.float64), (0, 3 - len(x)))
    v = np.asarray(v, dtype=np.float64)
    generator = GaussianGenerator(cfg.seed)
    counts = []
    remaining = cfg.n_paths
    while remaining > 0:
        count = min(cfg.block_size, remaining)
        counts.append(count)
        remaining -= count
    jobs = [(x, v, t, model, cfg, generator, b, count, stream) for b, count in enumerate(counts)]
    if cfg.threads and cfg.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_simulate_block, jobs))
    else:
        results = [_simulate_block(job) for job in jobs]

    pairs = []
    offset = 0
    for count in counts:
        if cfg.antithetic:
            half = np.arange(count // 2)
            pairs.append(offset + np.concatenate([half, half]))
            offset += count // 2
        else:
            pairs.append(offset + np.arange(count))
            offset += count
    X, V, W, alive, max_speed = (np.concatenate(parts) for parts in zip(*results))
    ensemble = ParticleEnsemble(t, x, v, X, V, W, alive, max_speed, np.concatenate(pairs), cfg.seed)
    if ensemble.dead_count():
        logger.warning("%d of %d paths hit non-finite states and were discarded",
                       ensemble.dead_count(), ensemble.n_paths)
    return ensemble


@dataclass(frozen=True)
class FeynmanKacEstimate:
    estimate: float
    std_error: float
    weighted: float
    dropped: float
    dropped_std_error: float
    hits: int
    n_paths: int
    drop_exponent: bool

    @property
    def hit_fraction(self) -> float:
        return self.hits / self.n_paths if self.n_paths else 0.0


def _evaluate(f_in: InitialDatum, X: np.ndarray, V: np.ndarray) -> np.ndarray:
    if isinstance(f_in, DistributionField):
        interpolant = FieldInterpolator(f_in.grid, f_in.values, outside="zero")
        return interpolant(X, V)
    return np.asarray(f_in(X, V), dtype=np.float64)


def _mean_and_error(samples: np.ndarray, pair: np.ndarray) -> Tuple[float, float]:
    sums = np.bincount(pair, weights=samples)
    counts = np.bincount(pair)
    used = counts > 0
    means = sums[used] / counts[used]
    estimate = float(np.mean(samples))
    if means.size < 2:
        return estimate, 0.0
    return estimate, float(np.std(means, ddof=1) / np.sqrt(means.size))


def feynman_kac(ensemble: ParticleEnsemble, f_in: InitialDatum, drop_exponent: bool = False) -> FeynmanKacEstimate:
    """Mean and standard error of exp(W_c) f_in(X_t, V_t); the drop-exponent variant omits exp(W_c)."""
    alive = ensemble.alive
    if not np.any(alive):
        raise ValueError("feynman_kac of an empty ensemble")
    values = _evaluate(f_in, ensemble.X[alive], ensemble.V[alive])
    W = ensemble.W_c[alive]
    if np.any(W < -1e-12):
        raise ValueError(f"negative accumulated reaction {W.min():.3e}; cbar must be nonnegative")
    weighted_samples = np.exp(W) * values
    pair = ensemble.pair[alive]
    weighted, weighted_error = _mean_and_error(weighted_samples, pair)
    dropped, dropped_error = _mean_and_error(values, pair)
    if np.any(values > weighted_samples * (1.0 + 1e-12) + 1e-300):
        raise ValueError("drop-exponent sample exceeds its weighted counterpart")
    hits = int(np.count_nonzero(values > 0.0))
    if drop_exponent:
        estimate, error = dropped, dropped_error
    else:
        estimate, error = weighted, weighted_error
    return FeynmanKacEstimate(estimate, error, weighted, dropped, dropped_error, hits, int(alive.sum()),
                              drop_exponent)


@dataclass(frozen=True)
class ProbeResult:
    t: float
    x: Tuple[float, ...]
    v: Tuple[float, float, float]
    estimate: float
    std_error: float
    hits: int
    n_paths: int
    max_speed: float = 0.0

    @property
    def inconclusive(self) -> bool:
        """No path reached the core; the bound is unknown, not zero."""
        return self.hits == 0

    def row(self) -> dict:
        row = {"t": self.t}
        row.update({f"x{i + 1}": value for i, value in enumerate(self.x)})
        row.update({f"v{i + 1}": value for i, value in enumerate(self.v)})
        row.update({"estimate": self.estimate, "std_error": self.std_error, "hits": self.hits,
                    "n_paths": self.n_paths})
        return row


def core_spreading_experiment(core: CorePrior, probes: Sequence[Tuple[float, Sequence[float], Sequence[float]]],
                              model: CoefficientModel, cfg: SdeConfig,
                              f_in: Optional[InitialDatum] = None) -> List[ProbeResult]:
    """Drop-exponent Feynman-Kac lower bounds at each (t, x, v) probe.

    Defaults to the exact core indicator as the initial datum; each probe uses
    its own RNG stream.
    """
    if f_in is None:
        period = model.period

        def f_in(X, V):
            return core.indicator(X, V, period)

    results = []
    for index, (t, x, v) in enumerate(probes):
        ensemble = simulate(x, v, t, model, cfg, stream=index)
        estimate = feynman_kac(ensemble, f_in, drop_exponent=True)
        result = ProbeResult(float(t), tuple(float(c) for c in x), tuple(float(c) for c in v),
                             estimate.estimate, estimate.std_error, estimate.hits, estimate.n_paths,
                             float(np.max(ensemble.max_speed)))
        if result.inconclusive:
            logger.warning("probe t=%g x=%s v=%s: no path reached the core (inconclusive)", t, x, v)
        results.append(result)
    return results


def spreading_exponent(results: Sequence[ProbeResult], core: CorePrior) -> Optional[float]:
    """Slope of log(-log bound) against log|v - v0| over probes with positive bounds outside the core."""
    speeds, logs = [], []
    for r in results:
        distance = float(np.linalg.norm(np.asarray(r.v) - np.asarray(core.v0)))
        if r.estimate > 0 and distance > core.r0 and r.estimate < core.delta0:
            speeds.append(distance)
            logs.append(-np.log(r.estimate / core.delta0))
    if len(speeds) < 2 or min(logs) <= 0:
        return None
    slope, _ = np.polyfit(np.log(speeds), np.log(logs), 1)
    return float(slope)


def min_sigma_eigenvalues(model: CoefficientModel, t: float, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of sigma at each (x, v)."""
    return symmetric_eigenvalues(model.sigma(t, x, v))[..., 0]
