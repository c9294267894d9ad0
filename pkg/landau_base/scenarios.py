"""
Bundled initial data.
"""
import inspect
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np

from .phase_grid import DistributionField, PhaseGrid
from .sde import CorePrior

logger = logging.getLogger(__name__)


def _spatial_profile(grid: PhaseGrid, amplitude: float) -> np.ndarray:
    """1 + amplitude * cos(2 pi x_1 / L), shaped to broadcast against fields."""
    if grid.d_x == 0:
        return np.ones(())
    x1 = grid.spatial_axis()
    profile = 1.0 + amplitude * np.cos(2.0 * np.pi * x1 / grid.L)
    return profile.reshape((grid.n_x,) + (1,) * (grid.d_x - 1) + (1, 1, 1))


def gaussian(grid: PhaseGrid, density: float = 1.0, temperature: float = 1.0,
             drift=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Maxwellian on the velocity nodes, rescaled so its discrete mass is exactly `density`."""
    v1, v2, v3 = grid.velocity_mesh()
    u = np.asarray(drift, dtype=np.float64)
    values = np.exp(-((v1 - u[0]) ** 2 + (v2 - u[1]) ** 2 + (v3 - u[2]) ** 2) / (2.0 * temperature))
    return density * values / (values.sum() * grid.velocity_cell_volume)


def maxwellian(grid: PhaseGrid, gamma: float, density: float = 1.0, temperature: float = 1.0,
               drift=(0.0, 0.0, 0.0)) -> DistributionField:
    values = np.broadcast_to(grid.broadcast_velocity(gaussian(grid, density, temperature, drift)), grid.shape)
    return DistributionField(grid, 0.0, gamma, values)


def bi_gaussian(grid: PhaseGrid, gamma: float, separation: float = 1.5, temperature: float = 0.5,
                weight: float = 0.5) -> DistributionField:
    """Two Maxwellians drifting apart along v_1, total mass 1."""
    left = gaussian(grid, weight, temperature, (-separation, 0.0, 0.0))
    right = gaussian(grid, 1.0 - weight, temperature, (separation, 0.0, 0.0))
    values = np.broadcast_to(grid.broadcast_velocity(left + right), grid.shape)
    return DistributionField(grid, 0.0, gamma, values)


def two_bump(grid: PhaseGrid, gamma: float, separation: float = 1.5, temperature: float = 0.5,
             amplitude: float = 0.5) -> DistributionField:
    """Two velocity bumps whose densities oscillate out of phase in x_1."""
    left = grid.broadcast_velocity(gaussian(grid, 0.5, temperature, (-separation, 0.0, 0.0)))
    right = grid.broadcast_velocity(gaussian(grid, 0.5, temperature, (separation, 0.0, 0.0)))
    values = _spatial_profile(grid, amplitude) * left + _spatial_profile(grid, -amplitude) * right
    return DistributionField(grid, 0.0, gamma, np.broadcast_to(values, grid.shape))


def compact_bump(grid: PhaseGrid, radius: float) -> np.ndarray:
    """exp(1 - 1 / (1 - |v|^2 / radius^2)) inside B_radius, 0 outside; peak value 1."""
    s2 = grid.speed() ** 2 / radius ** 2
    out = np.zeros_like(s2)
    inside = s2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
    return out


def well_distributed_product(grid: PhaseGrid, gamma: float, radius: float = 2.0, height: float = 0.2,
                             amplitude: float = 0.25) -> DistributionField:
    """chi_0(v) chi_per(x): a compactly supported velocity bump times a positive periodic profile."""
    chi_v = grid.broadcast_velocity(height * compact_bump(grid, radius))
    values = np.broadcast_to(_spatial_profile(grid, amplitude) * chi_v, grid.shape)
    return DistributionField(grid, 0.0, gamma, values)


def vacuum_core(grid: PhaseGrid, gamma: float, r0: float = 0.75, delta0: float = 1.0,
                smoothing: float = 1.0, x0=None, v0=(0.0, 0.0, 0.0)) -> DistributionField:
    """delta0 on B_r0(x0) x B_r0(v0) and vacuum elsewhere, softened over `smoothing` cells."""
    if x0 is None:
        x0 = (0.5 * grid.L,) * grid.d_x if grid.d_x else ()
    core = CorePrior(tuple(x0), tuple(v0), r0, delta0)
    return core.as_field(grid, gamma, smoothing)


def maxwellian_perturbation(grid: PhaseGrid, gamma: float, amplitude: float = 0.3) -> DistributionField:
    """Unit Maxwellian times 1 + amplitude (v_1^2 - v_2^2) exp(-|v|^2 / 8); positive for amplitude < e / 8."""
    if not 0.0 <= amplitude < np.e / 8.0:
        raise ValueError(f"amplitude must lie in [0, e/8) to keep the datum positive, got {amplitude}")
    v1, v2, v3 = grid.velocity_mesh()
    factor = 1.0 + amplitude * (v1 ** 2 - v2 ** 2) * np.exp(-(v1 ** 2 + v2 ** 2 + v3 ** 2) / 8.0)
    values = gaussian(grid) * factor
    values = values / (values.sum() * grid.velocity_cell_volume)
    return DistributionField(grid, 0.0, gamma, np.broadcast_to(grid.broadcast_velocity(values), grid.shape))


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    builder: Callable[..., DistributionField]
    d_x: int = 0
    defaults: Dict = field(default_factory=dict)

    def parameters(self) -> Tuple[str, ...]:
        """Keyword parameters the builder accepts besides the grid and gamma."""
        signature = inspect.signature(self.builder)
        return tuple(name for name in list(signature.parameters)[2:])

    def build(self, grid: PhaseGrid, gamma: float, **params) -> DistributionField:
        options = dict(self.defaults)
        options.update(params)
        f = self.builder(grid, gamma, **options)
        logger.info("scenario %s on %s: mass %.6g", self.name, grid.describe(), f.total_mass())
        return f


def builtin_scenarios() -> List[Scenario]:
    return [
        Scenario("maxwellian", "homogeneous unit Maxwellian", maxwellian),
        Scenario("bi_gaussian", "homogeneous pair of counter-drifting Maxwellians", bi_gaussian),
        Scenario("two_bump", "two velocity bumps modulated out of phase in x", two_bump, d_x=1),
        Scenario("well_distributed_product", "compact velocity bump times a positive periodic profile",
                 well_distributed_product, d_x=1),
        Scenario("vacuum_core", "mass core in phase space surrounded by vacuum", vacuum_core, d_x=1),
        Scenario("maxwellian_perturbation", "anisotropic perturbation of the unit Maxwellian",
                 maxwellian_perturbation),
    ]


def scenario_by_name(name: str) -> Scenario:
    for scenario in builtin_scenarios():
        if scenario.name == name:
            return scenario
    names = ", ".join(s.name for s in builtin_scenarios())
    raise ValueError(f"unknown scenario {name!r}; available: {names}")
