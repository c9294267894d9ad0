"""
Nonlinear driver: Picard iteration over adaptive time windows, chained with a
rebased Gaussian weight at every window start.
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .continuation_monitor import ContinuationMonitor, MonitorStatus
from .errors import WindowCollapse
from .gaussian_frame import GaussianWeight, framed_coefficients_of, from_frame, to_frame
from .kernel_stencil import KernelStencil, precompute_stencil
from .linear_solver import LinearSolution, LinearStepConfig, solve_linearized, step_linearized
from .moments import MomentField, moments
from .phase_grid import DistributionField
from .ul_norm import y_norm_values

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PicardConfig:
    T_target: float
    step: LinearStepConfig
    window: Optional[float] = None
    max_outer: int = 12
    contraction_tol: float = 0.5
    window_shrink: float = 0.5
    abs_tol: float = 1e-12
    singular_rule: str = "lattice"
    rebase_factor: float = 1e3
    rho_floor: float = 1e-3
    threads: Optional[int] = None

    def __post_init__(self):
        if not self.T_target > 0:
            raise ValueError(f"T_target must be positive, got {self.T_target}")
        if not 0.0 < self.contraction_tol < 1.0:
            raise ValueError(f"contraction_tol must lie in (0, 1), got {self.contraction_tol}")
        if not 0.0 < self.window_shrink < 1.0:
            raise ValueError(f"window_shrink must lie in (0, 1), got {self.window_shrink}")
        if self.max_outer < 1:
            raise ValueError(f"max_outer must be at least 1, got {self.max_outer}")
        if self.window is not None and not self.window >= self.step.dt:
            raise ValueError(f"window {self.window} is shorter than dt {self.step.dt}")


@dataclass
class WindowResult:
    """Outcome of one Picard window in the framed variable."""
    t0: float
    T_window: float
    weight: GaussianWeight
    converged: bool
    distances: List[float]
    ratios: List[float]
    solution: Optional[LinearSolution] = None
    shrinks: int = 0

    @property
    def iterations(self) -> int:
        return len(self.distances)

    def print_details(self):
        status = "converged" if self.converged else "not converged"
        print(f"window [{self.t0:.4g}, {self.t0 + self.T_window:.4g}] rho={self.weight.rho0:.4g} "
              f"{status} after {self.iterations} iterations, ratios "
              + ", ".join(f"{r:.3g}" for r in self.ratios))


@dataclass
class LandauSolution:
    fields: List[DistributionField]
    moments: List[MomentField]
    windows: List[WindowResult]
    statuses: List[MonitorStatus] = field(default_factory=list)
    norm_rows: List[dict] = field(default_factory=list)

    @property
    def times(self) -> List[float]:
        return [f.t for f in self.fields]

    @property
    def final(self) -> DistributionField:
        return self.fields[-1]


def _step_config(cfg: PicardConfig) -> LinearStepConfig:
    return dataclasses.replace(cfg.step, n_save=1)


def trajectory_distance(a: List[DistributionField], b: List[DistributionField]) -> float:
    """Discrete Y^0 distance of two trajectories sampled at the same times."""
    grid = a[0].grid
    differences = [x.values - y.values for x, y in zip(a, b)]
    return y_norm_values(grid, differences, [x.t for x in a], 0)


def picard_window(g_start: DistributionField, w: GaussianWeight, t0: float, T_window: float,
                  cfg: PicardConfig, stencil: KernelStencil) -> WindowResult:
    """Iterate g^n = solution of the linear problem with coefficients of g^{n-1}, from g^0 = g_start."""
    if t0 + T_window > w.t_end * (1.0 + 1e-12):
        raise ValueError(f"window end {t0 + T_window} exceeds the weight horizon {w.t_end}")
    step_cfg = _step_config(cfg)
    n_steps = max(1, int(round(T_window / step_cfg.dt)))
    previous = [g_start.with_values(g_start.values, t=t0 + k * step_cfg.dt) for k in range(n_steps + 1)]
    distances: List[float] = []
    ratios: List[float] = []
    below = 0
    solution = None
    for n in range(1, cfg.max_outer + 1):
        solution = solve_linearized(g_start, previous[:-1], T_window, step_cfg, weight=w, stencil=stencil,
                                    threads=cfg.threads)
        distance = trajectory_distance(solution.fields, previous)
        distances.append(distance)
        if len(distances) >= 2:
            ratio = distance / distances[-2] if distances[-2] > 0 else 0.0
            ratios.append(ratio)
            below = below + 1 if ratio <= cfg.contraction_tol else 0
        logger.debug("window t0=%.4g T=%.4g iteration %d: distance %.3e", t0, T_window, n, distance)
        previous = solution.fields
        if distance <= cfg.abs_tol or below >= 2:
            logger.info("window [%.4g, %.4g] converged in %d iterations, ratios %s", t0, t0 + T_window, n,
                        ", ".join(f"{r:.3g}" for r in ratios))
            return WindowResult(t0, T_window, w, True, distances, ratios, solution)
    return WindowResult(t0, T_window, w, False, distances, ratios, solution)


def adaptive_window(g_start: DistributionField, w: GaussianWeight, t0: float, T_window: float,
                    cfg: PicardConfig, stencil: KernelStencil) -> WindowResult:
    """picard_window with the window shrunk until the iteration contracts."""
    dt = cfg.step.dt
    shrinks = 0
    while True:
        result = picard_window(g_start, w, t0, T_window, cfg, stencil)
        result.shrinks = shrinks
        if result.converged:
            return result
        shrunk = T_window * cfg.window_shrink
        n_steps = int(np.floor(shrunk / dt + 1e-9))
        logger.info("window [%.4g, %.4g] failed to contract (ratios %s); shrinking", t0, t0 + T_window,
                    ", ".join(f"{r:.3g}" for r in result.ratios))
        if n_steps < 1:
            raise WindowCollapse(f"Picard window shrank below dt = {dt:g} at t = {t0:.6g}", achieved_horizon=t0)
        T_window = n_steps * dt
        shrinks += 1


def decay_peak(f: DistributionField, rho: float) -> float:
    """max over nodes of exp(rho <v>^2) f."""
    bracket2 = f.grid.broadcast_velocity(f.grid.japanese_bracket() ** 2)
    with np.errstate(over="ignore"):
        return float(np.max(f.values * np.exp(rho * bracket2)))


def rebase_rho(f: DistributionField, rho: float, reference: float, factor: float = 1e3,
               floor: float = 1e-3, iterations: int = 60) -> float:
    """Largest rho' <= rho with max exp(rho' <v>^2) f <= factor * reference, found by bisection."""
    limit = factor * reference
    if decay_peak(f, rho) <= limit:
        return rho
    if decay_peak(f, floor) > limit:
        logger.warning("Gaussian decay lost: even rho = %g exceeds the rebase limit", floor)
        return floor
    lo, hi = floor, rho
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if decay_peak(f, mid) <= limit:
            lo = mid
        else:
            hi = mid
    return lo


def solve_landau(f_in: DistributionField, gamma: float, rho0: float, T_target: float, cfg: PicardConfig,
                 kappa: Optional[float] = None, stencil: Optional[KernelStencil] = None,
                 monitor: Optional[ContinuationMonitor] = None, p_exponent: Optional[float] = None) -> LandauSolution:
    """Chain Picard windows from f_in to T_target; returns physical snapshots and their moments.

    Every snapshot passes the continuation monitor; homogeneous runs also pass
    its conservation checks, so a drifting run ends in MonitorBreach.
    """
    if not f_in.is_physical:
        raise ValueError("solve_landau expects physical initial data")
    if gamma != f_in.gamma:
        raise ValueError(f"gamma {gamma} does not match the initial field's {f_in.gamma}")
    reference = decay_peak(f_in, rho0)
    if not np.isfinite(reference):
        raise ValueError(f"exp(rho0 <v>^2) f_in is not bounded on the grid for rho0 = {rho0}")
    grid = f_in.grid
    if stencil is None:
        stencil = precompute_stencil(grid, gamma, cfg.singular_rule)
    monitor = monitor or ContinuationMonitor(gamma, p_exponent=p_exponent)

    t = f_in.t
    t_end = t + T_target
    rho = rho0
    window = cfg.window or T_target
    f_current = f_in
    fields = [f_in]
    moment_series = [moments(f_in, monitor.p_exponent)]
    statuses = [monitor.enforce(f_in)]
    windows: List[WindowResult] = []
    norm_rows: List[dict] = []
    n_save = cfg.step.n_save

    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        w = GaussianWeight(rho, rho / (4.0 * T_target) if kappa is None else kappa, t_origin=t)
        remaining = t_end - t
        T_window = min(window, remaining, w.T_max)
        T_window = max(cfg.step.dt, cfg.step.dt * round(T_window / cfg.step.dt))
        g_start = to_frame(f_current, w, t)
        result = adaptive_window(g_start, w, t, T_window, cfg, stencil)
        windows.append(result)
        framed = result.solution.fields
        for k in range(1, len(framed)):
            if k % n_save == 0 or k == len(framed) - 1:
                f_k = from_frame(framed[k], w)
                fields.append(f_k)
                moment_series.append(moments(f_k, monitor.p_exponent))
                statuses.append(monitor.enforce(f_k))
                if grid.d_x == 0:
                    steps = max(1, int(round((moment_series[-1].t - moment_series[-2].t) / cfg.step.dt)))
                    monitor.enforce_conservation(moment_series[0], moment_series[-2], moment_series[-1], steps)
        norm_rows.extend(row for row in result.solution.norm_rows if row["t"] > t or not norm_rows)
        f_current = fields[-1]
        t = t + result.T_window
        window = result.T_window
        new_rho = rebase_rho(f_current, rho, reference, cfg.rebase_factor, cfg.rho_floor)
        if new_rho != rho:
            logger.info("rebased rho from %.4g to %.4g at t = %.4g", rho, new_rho, t)
        rho = new_rho

    return LandauSolution(fields, moment_series, windows, statuses, norm_rows)


def fixed_point_residual(solution: LandauSolution, cfg: PicardConfig, stencil: KernelStencil) -> float:
    """Relative L2 gap between the last stored step and one extra step taken with the solution's own coefficients."""
    window = solution.windows[-1]
    framed = window.solution.fields
    if len(framed) < 2:
        return 0.0
    start, end = framed[-2], framed[-1]
    step_cfg = dataclasses.replace(_step_config(cfg), dt=end.t - start.t)
    coeffs = framed_coefficients_of(start.values, start.grid, start.gamma, start.t, window.weight, stencil,
                                    workers=step_cfg.workers)
    stepped, _ = step_linearized(start, coeffs, step_cfg)
    scale = float(np.linalg.norm(end.values))
    if scale == 0.0:
        return float(np.linalg.norm(stepped.values))
    return float(np.linalg.norm(stepped.values - end.values)) / scale
