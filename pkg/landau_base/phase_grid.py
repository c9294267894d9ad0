"""
Phase-space discretization: a periodic spatial torus times a truncated velocity cube.

Velocity nodes are cell centers of [-V_max, V_max]^3 with an even number of
cells per axis, so v = 0 is never a node. Spatial nodes sit at i * h_x on
[0, L) for every periodic axis.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

logger = logging.getLogger(__name__)

PHYSICAL = "physical"
FRAMED = "framed"


@dataclass(frozen=True)
class PhaseGrid:
    """Discretization of (x, v) phase space."""
    d_x: int
    L: Optional[float]
    n_x: Optional[int]
    v_max: float
    n_v: int

    @property
    def h_v(self) -> float:
        return 2.0 * self.v_max / self.n_v

    @property
    def h_x(self) -> Optional[float]:
        if self.d_x == 0:
            return None
        return self.L / self.n_x

    @property
    def spatial_shape(self) -> Tuple[int, ...]:
        return (self.n_x,) * self.d_x if self.d_x else ()

    @property
    def velocity_shape(self) -> Tuple[int, int, int]:
        return (self.n_v,) * 3

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.spatial_shape + self.velocity_shape

    @property
    def velocity_cell_volume(self) -> float:
        return self.h_v ** 3

    @property
    def spatial_cell_volume(self) -> float:
        return self.h_x ** self.d_x if self.d_x else 1.0

    def n_spatial_nodes(self) -> int:
        return int(np.prod(self.spatial_shape)) if self.d_x else 1

    def memory_bytes(self) -> int:
        """Storage of one float64 field on this grid."""
        return int(np.prod(self.shape)) * 8

    def velocity_axis(self) -> np.ndarray:
        return -self.v_max + self.h_v * (np.arange(self.n_v) + 0.5)

    def spatial_axis(self) -> np.ndarray:
        if self.d_x == 0:
            return np.zeros(0)
        return self.h_x * np.arange(self.n_x)

    def velocity_mesh(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        axis = self.velocity_axis()
        return tuple(np.meshgrid(axis, axis, axis, indexing="ij"))

    def velocity_points(self) -> np.ndarray:
        """All velocity nodes as an (n_v^3, 3) array in C order."""
        return np.stack([c.ravel() for c in self.velocity_mesh()], axis=-1)

    def spatial_points(self) -> np.ndarray:
        """All spatial nodes as an (n_x^d_x, d_x) array in C order."""
        if self.d_x == 0:
            return np.zeros((1, 0))
        axis = self.spatial_axis()
        mesh = np.meshgrid(*([axis] * self.d_x), indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=-1)

    def spatial_indices(self):
        """Iterate over spatial node index tuples (a single () when homogeneous)."""
        if self.d_x == 0:
            return [()]
        return list(np.ndindex(*self.spatial_shape))

    def speed(self) -> np.ndarray:
        v1, v2, v3 = self.velocity_mesh()
        return np.sqrt(v1 ** 2 + v2 ** 2 + v3 ** 2)

    def japanese_bracket(self) -> np.ndarray:
        """<v> = sqrt(1 + |v|^2) on the velocity nodes."""
        v1, v2, v3 = self.velocity_mesh()
        return np.sqrt(1.0 + v1 ** 2 + v2 ** 2 + v3 ** 2)

    def broadcast_velocity(self, array: np.ndarray) -> np.ndarray:
        """Reshape a velocity-shaped array so it broadcasts against full fields."""
        return array.reshape((1,) * self.d_x + array.shape)

    def periodic_offsets(self) -> np.ndarray:
        """Spatial node coordinates shifted to [-L/2, L/2), shape spatial_shape + (d_x,)."""
        if self.d_x == 0:
            return np.zeros((0,))
        axis = self.spatial_axis()
        centered = axis - self.L * np.round(axis / self.L)
        mesh = np.meshgrid(*([centered] * self.d_x), indexing="ij")
        return np.stack(mesh, axis=-1)

    def describe(self) -> str:
        if self.d_x == 0:
            return f"homogeneous grid {self.n_v}^3, V_max={self.v_max}, h_v={self.h_v:.4g}"
        return (f"{self.d_x}x grid {self.n_x}^{self.d_x} x {self.n_v}^3, L={self.L:.4g}, "
                f"V_max={self.v_max}, h_x={self.h_x:.4g}, h_v={self.h_v:.4g}")


def make_grid(d_x: int, L: Optional[float], n_x: Optional[int], v_max: float, n_v: int) -> PhaseGrid:
    """Validate parameters and build a PhaseGrid."""
    if d_x not in (0, 1, 3):
        raise ValueError(f"d_x must be 0, 1 or 3, got {d_x}")
    if not v_max > 0:
        raise ValueError(f"V_max must be positive, got {v_max}")
    if n_v < 8:
        raise ValueError(f"n_v must be at least 8, got {n_v}")
    if n_v % 2 != 0:
        raise ValueError(f"n_v must be even so that v = 0 is not a node, got {n_v}")
    if d_x == 0:
        return PhaseGrid(0, None, None, float(v_max), int(n_v))
    if L is None or not L > 0:
        raise ValueError(f"L must be positive when d_x >= 1, got {L}")
    if n_x is None or n_x < 1:
        raise ValueError(f"n_x must be a positive integer when d_x >= 1, got {n_x}")
    grid = PhaseGrid(int(d_x), float(L), int(n_x), float(v_max), int(n_v))
    logger.debug("built %s (%.1f MB per field)", grid.describe(), grid.memory_bytes() / 1e6)
    return grid


@dataclass(frozen=True)
class FrameTag:
    """Which unknown a field holds: physical f, or g = f / mu for a Gaussian weight."""
    kind: str = PHYSICAL
    rho0: Optional[float] = None
    kappa: Optional[float] = None
    t_origin: float = 0.0

    def __post_init__(self):
        if self.kind not in (PHYSICAL, FRAMED):
            raise ValueError(f"unknown frame kind {self.kind!r}")
        if self.kind == FRAMED and (self.rho0 is None or self.kappa is None):
            raise ValueError("framed fields need rho0 and kappa")

    def to_json(self) -> dict:
        if self.kind == PHYSICAL:
            return {"kind": PHYSICAL}
        return {"kind": FRAMED, "rho0": self.rho0, "kappa": self.kappa, "t_origin": self.t_origin}

    @staticmethod
    def from_json(data: dict) -> "FrameTag":
        if data.get("kind", PHYSICAL) == PHYSICAL:
            return FrameTag()
        return FrameTag(FRAMED, float(data["rho0"]), float(data["kappa"]), float(data.get("t_origin", 0.0)))


@dataclass(frozen=True, eq=False)
class DistributionField:
    """Nonnegative samples of f (or g) on every phase node at one time."""
    grid: PhaseGrid
    t: float
    gamma: float
    values: np.ndarray
    frame: FrameTag = field(default_factory=FrameTag)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("distribution contains NaN or Inf")
        if values.size and values.min() < 0.0:
            raise ValueError(f"distribution has negative values (min {values.min():.3e})")
        if not -3.0 <= self.gamma < 0.0:
            raise ValueError(f"gamma must lie in [-3, 0), got {self.gamma}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_physical(self) -> bool:
        return self.frame.kind == PHYSICAL

    def with_values(self, values: np.ndarray, t: Optional[float] = None,
                    frame: Optional[FrameTag] = None) -> "DistributionField":
        """Return a new field on the same grid."""
        return DistributionField(self.grid, self.t if t is None else t, self.gamma,
                                 values, self.frame if frame is None else frame)

    def velocity_slice(self, x_index: Tuple[int, ...] = ()) -> np.ndarray:
        return self.values[tuple(x_index)]

    def total_mass(self) -> float:
        cell = self.grid.velocity_cell_volume * self.grid.spatial_cell_volume
        return float(self.values.sum() * cell)

    @staticmethod
    def zeros(grid: PhaseGrid, gamma: float, t: float = 0.0,
              frame: Optional[FrameTag] = None) -> "DistributionField":
        return DistributionField(grid, t, gamma, np.zeros(grid.shape), frame or FrameTag())


class FieldInterpolator:
    """Multilinear interpolant of node values over (x, v).

    Spatial axes get a periodic ghost node at x = L. Velocity axes are padded
    with the cube faces: zero for distributions, edge values for coefficients.
    Extra trailing axes of `values` are interpolated componentwise.
    """

    def __init__(self, grid: PhaseGrid, values: np.ndarray, outside: str = "zero"):
        if outside not in ("zero", "edge"):
            raise ValueError(f"outside must be 'zero' or 'edge', got {outside!r}")
        self.grid = grid
        self.outside = outside
        n_core = grid.d_x + 3
        if values.shape[:n_core] != grid.shape:
            raise ValueError(f"values shape {values.shape} does not start with grid shape {grid.shape}")

        padded = np.asarray(values, dtype=np.float64)
        axes = []
        for axis in range(grid.d_x):
            padded = np.concatenate([padded, np.take(padded, [0], axis=axis)], axis=axis)
            axes.append(np.append(grid.spatial_axis(), grid.L))
        v_axis = np.concatenate([[-grid.v_max], grid.velocity_axis(), [grid.v_max]])
        pad_width = [(0, 0)] * padded.ndim
        for axis in range(grid.d_x, n_core):
            pad_width[axis] = (1, 1)
        if outside == "zero":
            padded = np.pad(padded, pad_width, mode="constant", constant_values=0.0)
        else:
            padded = np.pad(padded, pad_width, mode="edge")
        axes.extend([v_axis] * 3)
        self._interpolant = RegularGridInterpolator(
            tuple(axes), padded, method="linear", bounds_error=False,
            fill_value=0.0 if outside == "zero" else None)

    def __call__(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Evaluate at points x (N, d_x) and v (N, 3)."""
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        if self.grid.d_x:
            x = np.atleast_2d(np.asarray(x, dtype=np.float64))[:, :self.grid.d_x]
            x = np.mod(x, self.grid.L)
            points = np.concatenate([x, v], axis=1)
        else:
            points = v
        if self.outside == "edge":
            points = points.copy()
            points[:, self.grid.d_x:] = np.clip(points[:, self.grid.d_x:], -self.grid.v_max, self.grid.v_max)
        return self._interpolant(points)


def interpolate(field: DistributionField, x: Sequence[float], v: Sequence[float]) -> float:
    """Value of a distribution at one phase point; zero outside the velocity cube."""
    interpolant = FieldInterpolator(field.grid, field.values, outside="zero")
    return float(interpolant(np.atleast_2d(np.asarray(x, dtype=np.float64)),
                             np.atleast_2d(np.asarray(v, dtype=np.float64)))[0])


def window_bump(r: np.ndarray) -> np.ndarray:
    """Spatial window phi(|x|): 1 on B_1, exp(1 - 1/(1 - (|x|-1)^2)) between, 0 outside B_2."""
    r = np.asarray(r, dtype=np.float64)
    s = np.clip(r - 1.0, 0.0, 1.0)
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity transition from 0 (s <= 0) to 1 (s >= 1); slope at most 2, attained at s = 1/2."""
    s = np.asarray(s, dtype=np.float64)
    out = np.where(s >= 1.0, 1.0, 0.0)
    mid = (s > 0.0) & (s < 1.0)
    sm = s[mid]
    left = np.exp(-1.0 / sm)
    right = np.exp(-1.0 / (1.0 - sm))
    out[mid] = left / (left + right)
    return out


def ball_cutoff(r: np.ndarray) -> np.ndarray:
    """Radial chi: 1 on B_1, 0 outside B_2, monotone in between."""
    return 1.0 - smooth_step(np.asarray(r, dtype=np.float64) - 1.0)
