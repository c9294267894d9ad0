"""
Comparison-function checks for the tail bounds.

L := d_t + v . grad_x - tr(abar D_v^2) - cbar. For the x-independent ansatz
F = K exp(alpha t - beta(t) |v|^q), q = 2 - gamma, the v-derivatives are
exact, so L F / F is read off abar and cbar on the grid:

    L F / F = alpha - beta' |v|^q - beta^2 q^2 |v|^(2q-4) v.abar v
              + beta q |v|^(q-2) (tr abar + (q - 2) v^.abar v^) - cbar.

Sub-solutions need L F <= 0, super-solutions L F >= 0.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .collision_coefficients import CoefficientField
from .phase_grid import DistributionField

logger = logging.getLogger(__name__)

BetaFunction = Callable[[float], Tuple[float, float]]


@dataclass(frozen=True)
class SignReport:
    """Fraction of checked nodes meeting the sign condition."""
    kind: str
    fraction: float
    n_nodes: int
    worst: float
    parameters: dict = field(default_factory=dict)
    threshold: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.n_nodes > 0 and self.fraction >= 1.0

    def print_details(self):
        extra = ", ".join(f"{k}={v:.4g}" for k, v in self.parameters.items())
        threshold = "" if self.threshold is None else f", threshold {self.threshold:.4g}"
        print(f"{self.kind}: {100.0 * self.fraction:.2f}% of {self.n_nodes} nodes comply "
              f"(worst {self.worst:.3e}; {extra}{threshold})")


@dataclass(frozen=True)
class SubsolutionParams:
    T_lower: float
    C1: float
    delta1: float = 1.0
    v_min: float = 1.0
    tolerance: float = 0.0

    def beta(self, t: float) -> Tuple[float, float]:
        """beta(t) = 1 + C1 / (t - T_lower / 2) and its derivative."""
        s = t - 0.5 * self.T_lower
        if s <= 0.0:
            raise ValueError(f"beta is singular at t = {t} <= T_lower / 2 = {0.5 * self.T_lower}")
        return 1.0 + self.C1 / s, -self.C1 / s ** 2


@dataclass(frozen=True)
class SupersolutionParams:
    rho: float
    alpha: float
    C: float
    v_min: float = 1.0
    tolerance: float = 0.0

    def beta(self, t: float) -> Tuple[float, float]:
        """beta(t) = rho / (2 rho C t + 1) and its derivative."""
        denominator = 2.0 * self.rho * self.C * t + 1.0
        beta = self.rho / denominator
        return beta, -2.0 * self.C * beta ** 2


def ansatz_rate(coeffs: CoefficientField, beta: float, beta_prime: float, alpha: float,
                v_min: float) -> np.ndarray:
    """L F / F on every node with |v| >= v_min, flattened."""
    grid = coeffs.grid
    q = 2.0 - coeffs.gamma
    speed = grid.broadcast_velocity(grid.speed())
    v = grid.broadcast_velocity(np.stack(grid.velocity_mesh(), axis=-1))
    mask = np.broadcast_to(speed >= v_min, grid.shape)
    abar = coeffs.abar
    v_a_v = np.einsum("...i,...ij,...j->...", v, abar, v)
    trace = np.trace(abar, axis1=-2, axis2=-1)
    radial = v_a_v / speed ** 2
    rate = (alpha - beta_prime * speed ** q
            - beta ** 2 * q ** 2 * speed ** (2.0 * q - 4.0) * v_a_v
            + beta * q * speed ** (q - 2.0) * (trace + (q - 2.0) * radial)
            - coeffs.cbar)
    return rate[mask]


def _compliance(snapshots: Sequence[CoefficientField], beta_fn: BetaFunction, alpha: float, v_min: float,
                sign: float, tolerance: float) -> Tuple[float, int, float]:
    """Share of nodes with sign * (L F / F) <= tolerance, node count and the worst value."""
    complying = 0
    total = 0
    worst = -np.inf
    for coeffs in snapshots:
        beta, beta_prime = beta_fn(coeffs.t)
        values = sign * ansatz_rate(coeffs, beta, beta_prime, alpha, v_min)
        complying += int(np.count_nonzero(values <= tolerance))
        total += values.size
        if values.size:
            worst = max(worst, float(values.max()))
    fraction = complying / total if total else 0.0
    return fraction, total, worst


def subsolution_residual(snapshots: Sequence[CoefficientField], params: SubsolutionParams,
                         beta_fn: Optional[BetaFunction] = None,
                         c1_bracket: Tuple[float, float] = (1e-6, 1e6)) -> SignReport:
    """Sign of L f_ for f_ = delta1 exp(-beta(t) |v|^(2-gamma)) on snapshots with t > T_lower / 2.

    Compliance is reported at params.C1 (or under beta_fn when given). The
    admissible C1 form an interval [C1*, inf); C1* is found by bisection in
    log C1 and is None when even the upper bracket fails.
    """
    snapshots = [c for c in snapshots if c.t > 0.5 * params.T_lower]
    if not snapshots:
        raise ValueError(f"no coefficient snapshot later than T_lower / 2 = {0.5 * params.T_lower}")
    beta_fn = beta_fn or params.beta
    fraction, total, worst = _compliance(snapshots, beta_fn, 0.0, params.v_min, 1.0, params.tolerance)

    def complies(c1: float) -> bool:
        trial = SubsolutionParams(params.T_lower, c1, params.delta1, params.v_min, params.tolerance)
        return _compliance(snapshots, trial.beta, 0.0, params.v_min, 1.0, params.tolerance)[0] >= 1.0

    lo, hi = np.log(c1_bracket[0]), np.log(c1_bracket[1])
    threshold = None
    if complies(np.exp(hi)):
        if complies(np.exp(lo)):
            threshold = float(np.exp(lo))
        else:
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if complies(np.exp(mid)):
                    hi = mid
                else:
                    lo = mid
            threshold = float(np.exp(hi))
    report = SignReport("subsolution", fraction, total, worst, {"C1": params.C1, "T_lower": params.T_lower},
                        threshold)
    logger.info("subsolution check: %.2f%% compliance, admissible C1 from %s", 100.0 * fraction,
                "none" if threshold is None else f"{threshold:.4g}")
    return report


def supersolution_residual(snapshots: Sequence[CoefficientField], params: SupersolutionParams,
                           t0: float = 0.0) -> SignReport:
    """Sign of L F for F = K exp(alpha t - beta(t) |v|^(2-gamma)), t measured from t0."""
    shifted = [_retimed(c, c.t - t0) for c in snapshots]
    fraction, total, worst = _compliance(shifted, params.beta, params.alpha, params.v_min, -1.0, params.tolerance)
    return SignReport("supersolution", fraction, total, worst,
                      {"rho": params.rho, "alpha": params.alpha, "C": params.C})


def _retimed(coeffs: CoefficientField, t: float) -> CoefficientField:
    return CoefficientField(coeffs.grid, t, coeffs.gamma, coeffs.abar, coeffs.cbar, coeffs.cutoff_radius)


def find_supersolution(snapshots: Sequence[CoefficientField], rho: float, v_min: float = 1.0,
                       C_values: Optional[Sequence[float]] = None, t0: float = 0.0) -> SupersolutionParams:
    """Smallest growth rate alpha (over a grid of C) for which the super-solution sign holds everywhere."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    C_values = np.geomspace(1e-2, 1e3, 26) if C_values is None else C_values
    shifted = [_retimed(c, c.t - t0) for c in snapshots]
    best = None
    for C in C_values:
        trial = SupersolutionParams(rho, 0.0, float(C), v_min)
        needed = 0.0
        for coeffs in shifted:
            beta, beta_prime = trial.beta(coeffs.t)
            rate = ansatz_rate(coeffs, beta, beta_prime, 0.0, v_min)
            if rate.size:
                needed = max(needed, float(-rate.min()))
        alpha = needed * (1.0 + 1e-9) + 1e-12
        if best is None or alpha < best.alpha:
            best = SupersolutionParams(rho, alpha, float(C), v_min)
    logger.info("super-solution parameters: alpha=%.4g C=%.4g", best.alpha, best.C)
    return best


@dataclass
class EnvelopeReport:
    K: float
    params: SupersolutionParams
    shell: Tuple[float, float]
    ratios: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(ratio <= 1.0 + 1e-9 for _, ratio in self.ratios)

    def print_details(self):
        worst = max((r for _, r in self.ratios), default=0.0)
        print(f"envelope K={self.K:.4g} on |v| in [{self.shell[0]:g}, {self.shell[1]:g}]: "
              f"{'holds' if self.holds else 'violated'} (max f / envelope {worst:.4g})")


def envelope_check(fields: Sequence[DistributionField], params: SupersolutionParams,
                   shell: Tuple[float, float] = (2.5, 5.0)) -> EnvelopeReport:
    """Calibrate K at the first snapshot so f <= K exp(-beta(0)|v|^q) on the shell, then report
    max f / envelope on the shell at every later snapshot."""
    first = fields[0]
    grid = first.grid
    q = 2.0 - first.gamma
    speed = grid.broadcast_velocity(grid.speed())
    mask = np.broadcast_to((speed >= shell[0]) & (speed <= shell[1]), grid.shape)
    if not np.any(mask):
        raise ValueError(f"envelope shell {shell} holds no velocity node")
    t0 = first.t

    def log_envelope(t):
        beta, _ = params.beta(t - t0)
        return params.alpha * (t - t0) - beta * speed ** q

    with np.errstate(divide="ignore"):
        log_ratio0 = np.log(first.values) - log_envelope(t0)
    K = float(np.exp(np.max(log_ratio0[mask])))
    if not K > 0.0:
        raise ValueError("the first snapshot vanishes on the envelope shell; K cannot be calibrated")
    report = EnvelopeReport(K, params, shell)
    for f in fields[1:]:
        with np.errstate(divide="ignore"):
            log_ratio = np.log(f.values) - np.log(K) - log_envelope(f.t)
        report.ratios.append((f.t, float(np.exp(np.max(log_ratio[mask])))))
    return report
