"""
Time-dependent Gaussian weight mu(t, v) = exp(-(rho0 - kappa (t - t_origin)) <v>^2),
the framed unknown g = f / mu, and the framed coefficients A, B, C.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .collision_coefficients import CoefficientField, coefficients_from_values, nondivergence_form
from .kernel_stencil import KernelStencil
from .phase_grid import FRAMED, DistributionField, FrameTag, PhaseGrid

logger = logging.getLogger(__name__)

_TIME_SLACK = 1e-12


@dataclass(frozen=True)
class GaussianWeight:
    rho0: float
    kappa: float
    t_origin: float = 0.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError(f"rho0 must be positive, got {self.rho0}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def T_max(self) -> float:
        """Length of the interval on which rho0 - kappa t stays above rho0 / 2."""
        return self.rho0 / (2.0 * self.kappa)

    @property
    def t_end(self) -> float:
        return self.t_origin + self.T_max

    def exponent(self, t: float) -> float:
        """rho(t) = rho0 - kappa (t - t_origin)."""
        elapsed = t - self.t_origin
        if elapsed < -_TIME_SLACK * max(1.0, abs(t)) or elapsed > self.T_max * (1.0 + _TIME_SLACK):
            raise ValueError(f"t = {t} lies outside the weight's interval "
                             f"[{self.t_origin}, {self.t_end}]")
        return self.rho0 - self.kappa * elapsed

    def weight(self, t: float, v: np.ndarray) -> np.ndarray:
        """mu(t, v) for velocities with a trailing axis of length 3."""
        v = np.asarray(v, dtype=np.float64)
        return np.exp(-self.exponent(t) * (1.0 + np.sum(v * v, axis=-1)))

    def on_grid(self, grid: PhaseGrid, t: float) -> np.ndarray:
        """mu on the velocity nodes, shaped to broadcast against full fields."""
        return grid.broadcast_velocity(np.exp(-self.exponent(t) * grid.japanese_bracket() ** 2))

    def log_gradient(self, t: float, v: np.ndarray) -> np.ndarray:
        """grad_v mu / mu = -2 rho(t) v."""
        return -2.0 * self.exponent(t) * np.asarray(v, dtype=np.float64)

    def tag(self) -> FrameTag:
        return FrameTag(FRAMED, self.rho0, self.kappa, self.t_origin)

    @staticmethod
    def from_tag(tag: FrameTag) -> "GaussianWeight":
        if tag.kind != FRAMED:
            raise ValueError("a physical frame tag carries no Gaussian weight")
        return GaussianWeight(tag.rho0, tag.kappa, tag.t_origin)

    @staticmethod
    def for_horizon(rho0: float, T_target: float, t_origin: float = 0.0) -> "GaussianWeight":
        """Default kappa = rho0 / (4 T_target), which puts T_target at half of T_max."""
        if not T_target > 0:
            raise ValueError(f"T_target must be positive, got {T_target}")
        return GaussianWeight(rho0, rho0 / (4.0 * T_target), t_origin)


def weight(w: GaussianWeight, t: float, v) -> float:
    """exp(-(rho0 - kappa t) <v>^2) at one velocity."""
    return float(w.weight(t, np.asarray(v, dtype=np.float64)))


def to_frame(f: DistributionField, w: GaussianWeight, t: Optional[float] = None) -> DistributionField:
    """g = f / mu(t)."""
    if not f.is_physical:
        raise ValueError("to_frame expects a physical-frame density")
    t = f.t if t is None else t
    return f.with_values(f.values / w.on_grid(f.grid, t), t=t, frame=w.tag())


def from_frame(g: DistributionField, w: GaussianWeight, t: Optional[float] = None) -> DistributionField:
    """f = mu(t) g."""
    if g.frame != w.tag():
        raise ValueError(f"frame tag {g.frame} does not match weight {w}")
    t = g.t if t is None else t
    return g.with_values(g.values * w.on_grid(g.grid, t), t=t, frame=FrameTag())


@dataclass(frozen=True, eq=False)
class FramedCoefficients:
    """A, B, C of the framed equation at one time, plus the absorption rate kappa.

    `rho` is the weight exponent at time t (zero when the unknown is unframed),
    which lets the solver move between g and f = exp(-rho <v>^2) g.
    """
    grid: PhaseGrid
    t: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    kappa: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        shape = self.grid.shape
        if self.A.shape != shape + (3, 3) or self.B.shape != shape + (3,) or self.C.shape != shape:
            raise ValueError("framed coefficient shapes do not match the grid")
        for name, array in (("A", self.A), ("B", self.B), ("C", self.C)):
            if not np.all(np.isfinite(array)):
                raise ValueError(f"framed coefficient {name} is not finite")

    def is_zero(self) -> bool:
        return not (np.any(self.A) or np.any(self.B) or np.any(self.C))

    @staticmethod
    def zeros(grid: PhaseGrid, t: float = 0.0, kappa: float = 0.0, rho: float = 0.0) -> "FramedCoefficients":
        return FramedCoefficients(grid, t, np.zeros(grid.shape + (3, 3)), np.zeros(grid.shape + (3,)),
                                  np.zeros(grid.shape), kappa, rho)

    @staticmethod
    def constant(grid: PhaseGrid, A: np.ndarray, C: float = 0.0, t: float = 0.0) -> "FramedCoefficients":
        """Spatially constant A with no drift; used for frozen benchmarks."""
        A = np.broadcast_to(np.asarray(A, dtype=np.float64), grid.shape + (3, 3)).copy()
        return FramedCoefficients(grid, t, A, np.zeros(grid.shape + (3,)), np.full(grid.shape, float(C)))


def frame_coefficients(coeffs: CoefficientField, w: GaussianWeight, t: Optional[float] = None) -> FramedCoefficients:
    """A = abar, B_j = 2 abar_ij d_i mu / mu, C = cbar + abar_ij d_ij mu / mu for coefficients of mu g."""
    grid = coeffs.grid
    t = coeffs.t if t is None else t
    rho = w.exponent(t)
    v = grid.broadcast_velocity(np.stack(grid.velocity_mesh(), axis=-1))
    abar = coeffs.abar
    a_v = np.einsum("...ij,...j->...i", abar, np.broadcast_to(v, grid.shape + (3,)))
    B = -4.0 * rho * a_v
    trace = np.trace(abar, axis1=-2, axis2=-1)
    v_a_v = np.sum(a_v * v, axis=-1)
    C = coeffs.cbar - 2.0 * rho * trace + 4.0 * rho ** 2 * v_a_v
    return FramedCoefficients(grid, t, abar.copy(), B, C, w.kappa, rho)


def framed_residual(f: DistributionField, coeffs: CoefficientField, w: GaussianWeight,
                    margin: int = 3) -> float:
    """Max gap between tr(abar D^2 f) + cbar f and mu (tr(A D^2 g) + B.grad g + C g), relative to the former.

    Both sides use the same centered differences, so the gap is the O(h^2)
    truncation of the product rule on interior nodes.
    """
    grid = f.grid
    physical = nondivergence_form(grid, coeffs.abar, None, coeffs.cbar, f.values)
    framed = frame_coefficients(coeffs, w, f.t)
    mu = w.on_grid(grid, f.t)
    g = f.values / mu
    transformed = mu * nondivergence_form(grid, framed.A, framed.B, framed.C, g)
    interior = (slice(None),) * grid.d_x + (slice(margin, grid.n_v - margin),) * 3
    gap = np.abs(physical - transformed)[interior]
    scale = float(np.abs(physical[interior]).max())
    if scale == 0.0:
        return float(gap.max())
    return float(gap.max()) / scale


def framed_coefficients_of(g_values: np.ndarray, grid: PhaseGrid, gamma: float, t: float,
                           w: GaussianWeight, stencil: KernelStencil,
                           workers: Optional[int] = None) -> FramedCoefficients:
    """Framed coefficients of the iterate g: multiply by mu(t), convolve, then transform."""
    physical = np.maximum(g_values, 0.0) * w.on_grid(grid, t)
    coeffs = coefficients_from_values(grid, t, gamma, physical, stencil, workers=workers)
    return frame_coefficients(coeffs, w, t)
