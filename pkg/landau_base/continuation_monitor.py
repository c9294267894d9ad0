"""
Continuation monitor: the quantities whose finiteness lets a solution be extended.

For gamma in (-2, 0) only sup_x (M + E) is watched; for gamma in [-3, -2] the
p-th moment and sup f are watched as well. Homogeneous runs also enforce the
conservation laws: mass, momentum and energy drift against the first snapshot
and the entropy rise between consecutive snapshots.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Optional

import numpy as np

from .errors import MonitorBreach
from .moments import MomentField, default_p_exponent, moments
from .phase_grid import DistributionField

logger = logging.getLogger(__name__)

THRESHOLD_NAMES = ("mass_energy", "p_moment", "sup_f", "mass_drift", "momentum_drift", "energy_drift",
                   "entropy_rise")


@dataclass(frozen=True)
class MonitorThresholds:
    mass_energy: float = 1e3
    p_moment: float = 1e4
    sup_f: float = 1e6
    mass_drift: float = 1e-6
    momentum_drift: float = 1e-3
    energy_drift: float = 1e-3
    entropy_rise: float = 1e-6

    def __post_init__(self):
        for name in THRESHOLD_NAMES:
            if not getattr(self, name) > 0:
                raise ValueError(f"monitor threshold {name} must be positive")


@dataclass(frozen=True)
class MonitorStatus:
    t: float
    quantities: Dict[str, float] = field(default_factory=dict)
    breached: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.breached is None


def very_soft(gamma: float) -> bool:
    return gamma <= -2.0


class ContinuationMonitor:
    """Evaluates the continuation quantities of one snapshot at a time."""

    def __init__(self, gamma: float, thresholds: Optional[MonitorThresholds] = None,
                 p_exponent: Optional[float] = None):
        self.gamma = gamma
        self.thresholds = thresholds or MonitorThresholds()
        self.p_exponent = default_p_exponent(gamma) if p_exponent is None else p_exponent

    def check(self, f: DistributionField) -> MonitorStatus:
        m = moments(f, self.p_exponent)
        quantities = {"sup_M_plus_E": m.sup_mass_energy()}
        limits = {"sup_M_plus_E": self.thresholds.mass_energy}
        if very_soft(self.gamma):
            quantities["sup_P"] = float(np.max(m.P))
            quantities["sup_f"] = float(f.values.max()) if f.values.size else 0.0
            limits["sup_P"] = self.thresholds.p_moment
            limits["sup_f"] = self.thresholds.sup_f
        breached = None
        for name, value in quantities.items():
            if not np.isfinite(value) or value > limits[name]:
                breached = name
                break
        status = MonitorStatus(f.t, quantities, breached)
        logger.debug("monitor t=%.4g %s", f.t, quantities)
        return status

    def enforce(self, f: DistributionField) -> MonitorStatus:
        """check() that raises MonitorBreach instead of returning a breached status."""
        status = self.check(f)
        if not status.ok:
            limit = {"sup_M_plus_E": self.thresholds.mass_energy, "sup_P": self.thresholds.p_moment,
                     "sup_f": self.thresholds.sup_f}[status.breached]
            logger.error("continuation quantity %s breached at t=%.4g", status.breached, f.t)
            raise MonitorBreach(status.breached, status.quantities[status.breached], limit, f.t)
        return status

    def enforce_conservation(self, first: MomentField, previous: MomentField, current: MomentField,
                             steps: int = 1) -> Dict[str, float]:
        """Raise MonitorBreach when a homogeneous conservation law drifts past its threshold.

        The entropy threshold is per time step, so it is scaled by the number
        of steps between `previous` and `current`.
        """
        drift = conservation_drift(first, previous, current)
        for name, value in drift.items():
            limit = getattr(self.thresholds, name) * (steps if name == "entropy_rise" else 1)
            if not np.isfinite(value) or value > limit:
                logger.error("conservation check %s failed at t=%.4g", name, current.t)
                raise MonitorBreach(name, value, limit, current.t)
        logger.debug("conservation t=%.4g %s", current.t, drift)
        return drift


def conservation_drift(first: MomentField, previous: MomentField, current: MomentField) -> Dict[str, float]:
    """Drift of mass, momentum and energy since `first`, and the entropy change since `previous`.

    Momentum drift is measured in units of sqrt(M E) of the first snapshot.
    """
    start, before, now = first.total(), previous.total(), current.total()
    momentum = np.array([now[k] - start[k] for k in ("P1", "P2", "P3")])
    scale = float(np.sqrt(max(start["M"] * start["E"], 0.0)))
    return {
        "mass_drift": abs(now["M"] - start["M"]) / start["M"] if start["M"] else 0.0,
        "momentum_drift": float(np.linalg.norm(momentum)) / scale if scale else float(np.linalg.norm(momentum)),
        "energy_drift": abs(now["E"] - start["E"]) / start["E"] if start["E"] else 0.0,
        "entropy_rise": now["H"] - before["H"],
    }


def continuation_monitor(trajectory: Iterable[DistributionField], gamma: float,
                         thresholds: Optional[MonitorThresholds] = None,
                         p_exponent: Optional[float] = None) -> Iterator[MonitorStatus]:
    """Status stream, one entry per snapshot."""
    monitor = ContinuationMonitor(gamma, thresholds, p_exponent)
    for f in trajectory:
        yield monitor.check(f)
