"""
Linearized framed solver.

One step of
    d_t G + v . grad_x G + kappa <v>^2 G = tr(A D_v^2 G) + B . grad_v G + C G (+ eps Delta_{x,v} G)
is the Strang composition T(dt/2) K(dt/2) V(dt) K(dt/2) T(dt/2):

  T  spectral shift G(x - v tau, v) on the periodic axes, with the exact
     Fourier heat multiplier for eps Delta_x; velocity columns where the
     spectral shift undershoots fall back to periodic linear interpolation,
  K  exact absorption exp(-kappa <v>^2 tau),
  V  theta-implicit velocity step per spatial node (see velocity_operator).

Every stage keeps G nonnegative up to solver round-off; what is left is
clamped, and a step whose clamped mass exceeds `clamp_mass_budget` of the
total raises SolverError.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy import fft, ndimage

from .errors import SolverError
from .gaussian_frame import FramedCoefficients, GaussianWeight, framed_coefficients_of
from .kernel_stencil import KernelStencil
from .phase_grid import DistributionField, PhaseGrid, smooth_step
from .ul_norm import ul_norm_values
from .velocity_operator import CROSS_STENCILS, SOLVERS, explicit_rate, theta_step, velocity_matrix

logger = logging.getLogger(__name__)

BLOW_UP_FACTOR = 1e6
CLAMP_MASS_BUDGET = 1e-8
SPECTRAL_ROUNDOFF = 1e-13

Source = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class LinearStepConfig:
    dt: float
    eps: float = 0.0
    R_cut: Optional[float] = None
    theta: float = 1.0
    max_cfl: float = 0.5
    linear_solver: str = "bicgstab"
    tol: float = 1e-10
    max_iter: int = 500
    conserve_moments: bool = True
    mollify_width: float = 0.0
    clamp_tolerance: float = 1e-12
    clamp_mass_budget: float = CLAMP_MASS_BUDGET
    cross_stencil: str = "monotone"
    n_save: int = 1
    workers: Optional[int] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.eps < 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.eps > 0 and self.R_cut is None:
            raise ValueError("the viscous variant (eps > 0) needs a finite R_cut")
        if self.R_cut is not None and self.R_cut < 3:
            raise ValueError(f"R_cut must be at least 3, got {self.R_cut}")
        if self.linear_solver not in SOLVERS:
            raise ValueError(f"linear_solver must be one of {SOLVERS}, got {self.linear_solver!r}")
        if self.cross_stencil not in CROSS_STENCILS:
            raise ValueError(f"cross_stencil must be one of {CROSS_STENCILS}, got {self.cross_stencil!r}")
        if not self.clamp_mass_budget > 0:
            raise ValueError(f"clamp_mass_budget must be positive, got {self.clamp_mass_budget}")
        if self.n_save < 1:
            raise ValueError(f"n_save must be at least 1, got {self.n_save}")


@dataclass
class StepReport:
    t: float
    clamp_mass: float = 0.0
    min_before_clamp: float = 0.0
    iterations: int = 0


@dataclass
class LinearSolution:
    """Saved snapshots of G with the norm time series of the run."""
    fields: List[DistributionField]
    reports: List[StepReport]
    norm_rows: List[dict] = field(default_factory=list)

    @property
    def times(self) -> List[float]:
        return [f.t for f in self.fields]

    @property
    def final(self) -> DistributionField:
        return self.fields[-1]

    def total_clamp_mass(self) -> float:
        return float(sum(r.clamp_mass for r in self.reports))


def domain_cutoff(grid: PhaseGrid, R_cut: float) -> np.ndarray:
    """chi_R on the phase grid: 1 where |(x, v)| <= R - 2, 0 where |(x, v)| >= R - 1."""
    speed2 = grid.broadcast_velocity(grid.speed() ** 2)
    if grid.d_x:
        offsets = grid.periodic_offsets()
        x2 = np.sum(offsets ** 2, axis=-1).reshape(grid.spatial_shape + (1, 1, 1))
        radius = np.sqrt(x2 + speed2)
    else:
        radius = np.sqrt(speed2)
    return 1.0 - smooth_step(radius - (R_cut - 2.0))


def apply_domain_cutoff(f: DistributionField, R_cut: float) -> DistributionField:
    """Multiply by the smooth cutoff chi_R of the bounded-domain problem."""
    if R_cut < 3:
        raise ValueError(f"R_cut must be at least 3, got {R_cut}")
    return f.with_values(f.values * domain_cutoff(f.grid, R_cut))


def mollify(values: np.ndarray, grid: PhaseGrid, width: float) -> np.ndarray:
    """Gaussian pre-smoother of standard deviation `width`, periodic in x and zero-extended in v."""
    if width <= 0.0:
        return values
    sigma = [width / grid.h_x] * grid.d_x + [width / grid.h_v] * 3
    modes = ["wrap"] * grid.d_x + ["constant"] * 3
    return ndimage.gaussian_filter(values, sigma=sigma, mode=modes)


def _wavenumbers(grid: PhaseGrid) -> List[np.ndarray]:
    """Angular wavenumbers on each periodic axis, the last one halved for rfftn."""
    out = []
    for axis in range(grid.d_x):
        if axis == grid.d_x - 1:
            k = 2.0 * np.pi * fft.rfftfreq(grid.n_x, d=grid.h_x)
        else:
            k = 2.0 * np.pi * fft.fftfreq(grid.n_x, d=grid.h_x)
        shape = [1] * (grid.d_x + 3)
        shape[axis] = k.size
        out.append(k.reshape(shape))
    return out


def _spectral_shift(values: np.ndarray, grid: PhaseGrid, tau: float, workers: Optional[int]) -> np.ndarray:
    axes = tuple(range(grid.d_x))
    spectrum = fft.rfftn(values, axes=axes, workers=workers)
    velocity = grid.velocity_mesh()
    phase = np.zeros(spectrum.shape)
    for axis, k in enumerate(_wavenumbers(grid)):
        v_axis = velocity[axis].reshape((1,) * grid.d_x + grid.velocity_shape)
        phase = phase + k * v_axis
    spectrum *= np.exp(-1j * tau * phase)
    return fft.irfftn(spectrum, s=grid.spatial_shape, axes=axes, workers=workers)


def linear_shift(values: np.ndarray, grid: PhaseGrid, tau: float) -> np.ndarray:
    """values(x - v tau, v) by periodic linear interpolation, axis by axis.

    A convex combination of two nodes, so it never creates negative values;
    exact when v tau is a multiple of h_x.
    """
    n = grid.n_x
    velocity = grid.velocity_mesh()
    out = values
    for axis in range(grid.d_x):
        cells = velocity[axis] * tau / grid.h_x
        whole = np.floor(cells)
        frac = cells - whole
        nodes = np.arange(n).reshape([n if a == axis else 1 for a in range(grid.d_x)] + [1, 1, 1])
        left = (nodes - whole.astype(np.int64)) % n
        lower = np.take_along_axis(out, np.broadcast_to(left, out.shape), axis=axis)
        upper = np.take_along_axis(out, np.broadcast_to((left - 1) % n, out.shape), axis=axis)
        out = (1.0 - frac) * lower + frac * upper
    return out


def _heat(values: np.ndarray, grid: PhaseGrid, nu: float, workers: Optional[int]) -> np.ndarray:
    axes = tuple(range(grid.d_x))
    spectrum = fft.rfftn(values, axes=axes, workers=workers)
    spectrum *= np.exp(-nu * sum(k ** 2 for k in _wavenumbers(grid)))
    return fft.irfftn(spectrum, s=grid.spatial_shape, axes=axes, workers=workers)


def transport(values: np.ndarray, grid: PhaseGrid, tau: float, eps: float = 0.0,
              workers: Optional[int] = None, nonnegative: bool = False) -> np.ndarray:
    """values(x - v tau, v), then the exp(eps tau Delta_x) multiplier; identity when homogeneous.

    With `nonnegative`, every velocity column whose spectral shift dips below
    round-off is shifted by linear interpolation instead.
    """
    if grid.d_x == 0 or tau == 0.0:
        return values
    shifted = _spectral_shift(values, grid, tau, workers)
    if nonnegative:
        floor = -SPECTRAL_ROUNDOFF * max(float(values.max()), 0.0)
        undershoot = shifted.min(axis=tuple(range(grid.d_x))) < floor
        if np.any(undershoot):
            logger.debug("transport: %d of %d velocity columns use linear interpolation",
                         int(undershoot.sum()), undershoot.size)
            shifted = np.where(undershoot, linear_shift(values, grid, tau), shifted)
    if eps > 0.0:
        shifted = _heat(shifted, grid, eps * tau, workers)
    return shifted


def absorption(grid: PhaseGrid, kappa: float, tau: float) -> np.ndarray:
    return grid.broadcast_velocity(np.exp(-kappa * tau * grid.japanese_bracket() ** 2))


def _moment_basis(grid: PhaseGrid) -> np.ndarray:
    """1, v1, v2, v3, |v|^2 on the velocity nodes, shape (5, n, n, n)."""
    v1, v2, v3 = grid.velocity_mesh()
    return np.stack([np.ones_like(v1), v1, v2, v3, v1 ** 2 + v2 ** 2 + v3 ** 2])


def restore_moments(before: np.ndarray, after: np.ndarray, basis: np.ndarray, max_iter: int = 30,
                    tol: float = 1e-13) -> np.ndarray:
    """Multiply `after` by exp(lambda . basis) so its mass, momentum and energy match `before`.

    Both arrays are physical-frame velocity slices. lambda solves the 5 x 5
    moment system by Newton's method; the exponential keeps the result
    nonnegative.
    """
    if not np.any(after):
        return after
    target = np.tensordot(basis, before, axes=3)
    scale = float(np.max(np.abs(target)))
    if scale == 0.0:
        return after
    coefficients = np.zeros(basis.shape[0])
    corrected = after
    for _ in range(max_iter):
        residual = target - np.tensordot(basis, corrected, axes=3)
        if np.max(np.abs(residual)) <= tol * scale:
            return corrected
        jacobian = np.einsum("aijk,bijk,ijk->ab", basis, basis, corrected)
        if np.linalg.cond(jacobian) > 1e14:
            logger.debug("moment system is singular; keeping the uncorrected slice")
            return after
        coefficients = coefficients + np.linalg.solve(jacobian, residual)
        corrected = after * np.exp(np.tensordot(coefficients, basis, axes=1))
    logger.debug("moment correction stopped at residual %.3e", float(np.max(np.abs(residual))) / scale)
    return corrected


def _velocity_node_step(args):
    """One implicit velocity solve; returns (values, iterations, min before clamp, clamped sum)."""
    u, A, B, C, h, cfg, source, mu, basis = args
    L = velocity_matrix(A, B, C, h, eps=cfg.eps, cross_stencil=cfg.cross_stencil)
    solved = theta_step(u, L, cfg.dt, cfg.theta, cfg.linear_solver, cfg.tol, cfg.max_iter, source)
    values = solved.values
    lowest = float(values.min())
    clamped = float(-values[values < 0.0].sum())
    values = np.maximum(values, 0.0)
    if cfg.conserve_moments and mu is not None:
        before = mu * u
        if source is not None:
            before = before + cfg.dt * mu * source
        values = restore_moments(before, mu * values, basis) / mu
    return values, solved.iterations, lowest, clamped


def step_linearized(G: DistributionField, coeffs: FramedCoefficients, cfg: LinearStepConfig,
                    source: Optional[Source] = None, pool: Optional[ThreadPoolExecutor] = None):
    """Advance G by one step with frozen coefficients; returns (G', StepReport)."""
    grid = G.grid
    if coeffs.grid != grid:
        raise ValueError("coefficients live on a different grid")
    dt = cfg.dt
    t_mid = G.t + 0.5 * dt

    if cfg.theta < 0.5:
        rate = explicit_rate(coeffs.A, coeffs.B, grid.h_v, cfg.eps)
        if rate * dt > cfg.max_cfl:
            raise SolverError(f"CFL violation: dt * rate = {rate * dt:.3g} exceeds {cfg.max_cfl} "
                              f"with theta = {cfg.theta}")

    values = transport(np.array(G.values), grid, 0.5 * dt, cfg.eps, cfg.workers, nonnegative=True)
    half_absorb = absorption(grid, coeffs.kappa, 0.5 * dt) if coeffs.kappa else None
    if half_absorb is not None:
        values = values * half_absorb

    iterations = 0
    lowest = 0.0
    clamped = 0.0
    if not coeffs.is_zero() or cfg.eps > 0.0 or source is not None:
        source_values = source(t_mid) if source is not None else None
        mu = None
        basis = None
        if cfg.conserve_moments:
            mu = np.exp(-(coeffs.rho - coeffs.kappa * 0.5 * dt) * grid.japanese_bracket() ** 2)
            basis = _moment_basis(grid)
        jobs = []
        for index in grid.spatial_indices():
            jobs.append((values[index], coeffs.A[index], coeffs.B[index], coeffs.C[index], grid.h_v, cfg,
                         None if source_values is None else source_values[index], mu, basis))
        results = pool.map(_velocity_node_step, jobs) if pool is not None else map(_velocity_node_step, jobs)
        for index, (node_values, node_iterations, node_min, node_clamped) in zip(grid.spatial_indices(), results):
            values[index] = node_values
            iterations += node_iterations
            lowest = min(lowest, node_min)
            clamped += node_clamped

    if half_absorb is not None:
        values = values * half_absorb
    values = transport(values, grid, 0.5 * dt, cfg.eps, cfg.workers, nonnegative=True)
    if cfg.R_cut is not None:
        values = values * domain_cutoff(grid, cfg.R_cut)

    negative = values < 0.0
    lowest = min(lowest, float(values.min()) if values.size else 0.0)
    clamped += float(-values[negative].sum())
    values[negative] = 0.0
    cell = grid.velocity_cell_volume * grid.spatial_cell_volume
    report = StepReport(G.t + dt, clamp_mass=clamped * cell, min_before_clamp=lowest, iterations=iterations)
    peak = float(values.max()) if values.size else 0.0
    if report.min_before_clamp < -cfg.clamp_tolerance * max(peak, 1e-300):
        logger.debug("t=%.4g: clamping undershoot %.3e (mass %.3e)", report.t, report.min_before_clamp,
                     report.clamp_mass)
    total = float(values.sum()) * cell
    if report.clamp_mass > cfg.clamp_mass_budget * total:
        raise SolverError(f"clamped mass {report.clamp_mass:.3e} at t = {report.t:.4g} exceeds "
                          f"{cfg.clamp_mass_budget:g} of the total {total:.3e}")
    return G.with_values(values, t=G.t + dt), report


CoefficientSource = Union[None, Sequence[DistributionField], Sequence[FramedCoefficients]]


def _coefficients_for_step(k: int, t: float, grid: PhaseGrid, gamma: float, h: CoefficientSource,
                           weight: Optional[GaussianWeight], stencil: Optional[KernelStencil],
                           workers: Optional[int]) -> FramedCoefficients:
    kappa = weight.kappa if weight is not None else 0.0
    rho = weight.exponent(t) if weight is not None else 0.0
    if h is None or len(h) == 0:
        return FramedCoefficients.zeros(grid, t, kappa, rho)
    item = h[min(k, len(h) - 1)]
    if isinstance(item, FramedCoefficients):
        return item
    if weight is None or stencil is None:
        raise ValueError("computing coefficients from an iterate needs a weight and a stencil")
    return framed_coefficients_of(item.values, grid, gamma, t, weight, stencil, workers=workers)


def solve_linearized(g_in: DistributionField, h: CoefficientSource, T: float, cfg: LinearStepConfig,
                     weight: Optional[GaussianWeight] = None, stencil: Optional[KernelStencil] = None,
                     source: Optional[Source] = None, record_norms: bool = True,
                     threads: Optional[int] = None) -> LinearSolution:
    """Integrate the linear problem on [g_in.t, g_in.t + T].

    `h` is either a time-indexed list of framed iterates (coefficients are
    computed from mu(t_k) h_k and held fixed on step k), a list of
    FramedCoefficients, or None for zero coefficients with the weight's
    absorption rate.
    """
    grid = g_in.grid
    n_steps = max(1, int(round(T / cfg.dt)))
    if abs(n_steps * cfg.dt - T) > 1e-9 * max(T, cfg.dt):
        logger.debug("T = %g is not a multiple of dt = %g; running %d steps", T, cfg.dt, n_steps)

    G = g_in
    if cfg.R_cut is not None:
        G = apply_domain_cutoff(G, cfg.R_cut)
    fields = [G]
    reports: List[StepReport] = []
    rows: List[dict] = []
    sup_h00 = 0.0
    l2_h01 = 0.0
    y_initial = None

    if record_norms:
        h00 = ul_norm_values(grid, G.values, 0, 0)
        sup_h00 = h00
        y_initial = np.sqrt(h00)
        rows.append(_norm_row(grid, G, h00, ul_norm_values(grid, G.values, 0, 1), np.sqrt(h00), 0.0))

    pool = ThreadPoolExecutor(max_workers=threads) if threads and threads > 1 and grid.d_x else None
    try:
        for k in range(n_steps):
            coeffs = _coefficients_for_step(k, G.t, grid, g_in.gamma, h, weight, stencil, cfg.workers)
            if cfg.mollify_width > 0.0:
                coeffs = FramedCoefficients(grid, coeffs.t, mollify_matrix(coeffs.A, grid, cfg.mollify_width),
                                            mollify_matrix(coeffs.B, grid, cfg.mollify_width),
                                            mollify(coeffs.C, grid, cfg.mollify_width), coeffs.kappa, coeffs.rho)
            G, report = step_linearized(G, coeffs, cfg, source, pool)
            reports.append(report)

            saving = (k + 1) % cfg.n_save == 0 or k == n_steps - 1
            if saving:
                fields.append(G)
            if record_norms:
                h00 = ul_norm_values(grid, G.values, 0, 0)
                h01 = ul_norm_values(grid, G.values, 0, 1)
                sup_h00 = max(sup_h00, h00)
                l2_h01 += cfg.dt * h01
                y_accum = float(np.sqrt(sup_h00) + np.sqrt(l2_h01))
                if y_initial and y_accum > BLOW_UP_FACTOR * y_initial:
                    raise SolverError(f"blow-up guard: Y0 grew from {y_initial:.3e} to {y_accum:.3e} "
                                      f"by t = {G.t:.4g}")
                if saving:
                    rows.append(_norm_row(grid, G, h00, h01, y_accum, report.clamp_mass))
    finally:
        if pool is not None:
            pool.shutdown()

    solution = LinearSolution(fields, reports, rows)
    if solution.total_clamp_mass() > 0.0:
        logger.debug("clamped mass %.3e over %d steps, lowest value %.3e", solution.total_clamp_mass(), n_steps,
                     min(r.min_before_clamp for r in reports))
    return solution


def _norm_row(grid: PhaseGrid, G: DistributionField, h00: float, h01: float, y_accum: float,
              clamp_mass: float) -> dict:
    return {"t": G.t, "H00": h00, "H01": h01, "H20": ul_norm_values(grid, G.values, 2, 0),
            "Y0_accum": y_accum, "clamp_mass": clamp_mass}


def mollify_matrix(array: np.ndarray, grid: PhaseGrid, width: float) -> np.ndarray:
    """Componentwise mollification of an array with trailing component axes."""
    n_core = grid.d_x + 3
    flat = array.reshape(array.shape[:n_core] + (-1,))
    out = np.stack([mollify(flat[..., c], grid, width) for c in range(flat.shape[-1])], axis=-1)
    return out.reshape(array.shape)


def integrate_linear(g_in: DistributionField, coeffs: FramedCoefficients, T: float, cfg: LinearStepConfig,
                     source: Optional[Source] = None) -> LinearSolution:
    """Frozen-coefficient integration (the coefficients are reused on every step)."""
    return solve_linearized(g_in, [coeffs], T, cfg, source=source, record_norms=False)
