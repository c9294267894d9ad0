"""
Physical moments of f per spatial node: mass, momentum, energy, entropy and a p-th moment.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .phase_grid import DistributionField, PhaseGrid

logger = logging.getLogger(__name__)

ENTROPY_FLOOR = 1e-300


def p_threshold(gamma: float) -> float:
    """3 |gamma| / (5 + gamma): moments of higher order control the very soft case."""
    return 3.0 * abs(gamma) / (5.0 + gamma)


def default_p_exponent(gamma: float) -> float:
    return float(np.floor(p_threshold(gamma)) + 1.0)


@dataclass(frozen=True, eq=False)
class MomentField:
    """Moment densities on the spatial nodes (0-d arrays when homogeneous)."""
    grid: PhaseGrid
    t: float
    M: np.ndarray
    momentum: np.ndarray
    E: np.ndarray
    H: np.ndarray
    P: np.ndarray
    p_exponent: float

    def total(self) -> Dict[str, float]:
        """Integrals over the torus (the node values themselves when homogeneous)."""
        cell = self.grid.spatial_cell_volume
        out = {name: float(np.sum(getattr(self, name)) * cell) for name in ("M", "E", "H", "P")}
        momentum = self.momentum.reshape((-1, 3)).sum(axis=0) * cell
        out.update({"P1": float(momentum[0]), "P2": float(momentum[1]), "P3": float(momentum[2])})
        return out

    def sup_mass_energy(self) -> float:
        return float(np.max(self.M + self.E))

    def rows(self):
        """One dict per spatial node, for CSV output."""
        for index in self.grid.spatial_indices():
            row = {"t": self.t}
            row.update({f"x{a + 1}": float(self.grid.spatial_axis()[i]) for a, i in enumerate(index)})
            row.update({"M": float(self.M[index]), "E": float(self.E[index]), "H": float(self.H[index]),
                        "P": float(self.P[index]), "P1": float(self.momentum[index][0]),
                        "P2": float(self.momentum[index][1]), "P3": float(self.momentum[index][2])})
            yield row


def moments(f: DistributionField, p_exponent: Optional[float] = None) -> MomentField:
    """Cell-sum quadrature of int f, int v f, int |v|^2 f, int f log f and int |v|^p f over velocity."""
    if not f.is_physical:
        raise ValueError("moments need a physical-frame density")
    threshold = p_threshold(f.gamma)
    if p_exponent is None:
        p_exponent = default_p_exponent(f.gamma)
    if not p_exponent > threshold:
        raise ValueError(f"p_exponent = {p_exponent} must exceed 3|gamma|/(5+gamma) = {threshold:.4g}")
    grid = f.grid
    v_axes = tuple(range(grid.d_x, grid.d_x + 3))
    cell = grid.velocity_cell_volume
    values = f.values
    speed = grid.broadcast_velocity(grid.speed())

    def integrate(weight):
        return np.sum(values * weight, axis=v_axes) * cell

    mass = np.sum(values, axis=v_axes) * cell
    momentum = np.stack([integrate(grid.broadcast_velocity(c)) for c in grid.velocity_mesh()], axis=-1)
    energy = integrate(speed ** 2)
    positive = values > ENTROPY_FLOOR
    f_log_f = np.where(positive, values * np.log(np.maximum(values, ENTROPY_FLOOR)), 0.0)
    entropy = np.sum(f_log_f, axis=v_axes) * cell
    p_moment = integrate(speed ** p_exponent)
    return MomentField(grid, f.t, np.asarray(mass), np.asarray(momentum), np.asarray(energy),
                       np.asarray(entropy), np.asarray(p_moment), float(p_exponent))


def maxwellian_moments(density: float, temperature: float) -> Dict[str, float]:
    """Exact M, E, H of density (2 pi T)^{-3/2} exp(-|v|^2 / 2T)."""
    return {"M": density, "E": 3.0 * density * temperature,
            "H": density * (np.log(density) - 1.5 * np.log(2.0 * np.pi * temperature) - 1.5)}
