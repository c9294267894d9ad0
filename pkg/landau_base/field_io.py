"""
Field serialization: raw little-endian float64 in x-major, v-minor order plus a JSON sidecar.
"""
import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

from .kernel_stencil import A_COMPONENTS
from .phase_grid import DistributionField, FrameTag, PhaseGrid, make_grid

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

COEFFICIENT_COMPONENTS = ["a11", "a12", "a13", "a22", "a23", "a33", "cbar"]


def grid_header(grid: PhaseGrid) -> dict:
    return {"d_x": grid.d_x, "L": grid.L, "n_x": grid.n_x, "V_max": grid.v_max, "n_v": grid.n_v}


def grid_from_header(header: dict) -> PhaseGrid:
    return make_grid(header["d_x"], header.get("L"), header.get("n_x"), header["V_max"], header["n_v"])


def _write(stem: Path, array: np.ndarray, header: dict) -> None:
    stem.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(array, dtype="<f8").tofile(stem.with_suffix(".f64"))
    with open(stem.with_suffix(".json"), "w") as f:
        json.dump(header, f, indent=2, sort_keys=True)


def _read(stem: Path):
    with open(stem.with_suffix(".json")) as f:
        header = json.load(f)
    raw = np.fromfile(stem.with_suffix(".f64"), dtype="<f8")
    return header, raw


def save_field(stem: PathLike, field: DistributionField) -> None:
    """Write `<stem>.f64` and `<stem>.json`."""
    header = grid_header(field.grid)
    header.update({"kind": "distribution", "t": field.t, "gamma": field.gamma,
                   "frame": field.frame.to_json()})
    _write(Path(stem), field.values, header)


def load_field(stem: PathLike) -> DistributionField:
    header, raw = _read(Path(stem))
    if header.get("kind") != "distribution":
        raise ValueError(f"{stem} does not hold a distribution field")
    grid = grid_from_header(header)
    return DistributionField(grid, float(header["t"]), float(header["gamma"]),
                             raw.reshape(grid.shape), FrameTag.from_json(header["frame"]))


def save_coefficients(stem: PathLike, coeffs) -> None:
    """Write a CoefficientField as seven trailing components (a11, a12, a13, a22, a23, a33, cbar)."""
    packed = np.empty(coeffs.grid.shape + (7,))
    for c, (i, j) in enumerate(A_COMPONENTS):
        packed[..., c] = coeffs.abar[..., i, j]
    packed[..., 6] = coeffs.cbar
    header = grid_header(coeffs.grid)
    header.update({"kind": "coefficients", "t": coeffs.t, "gamma": coeffs.gamma,
                   "components": COEFFICIENT_COMPONENTS, "cutoff_radius": coeffs.cutoff_radius})
    _write(Path(stem), packed, header)


def load_coefficients(stem: PathLike):
    from .collision_coefficients import CoefficientField

    header, raw = _read(Path(stem))
    if header.get("kind") != "coefficients":
        raise ValueError(f"{stem} does not hold a coefficient field")
    grid = grid_from_header(header)
    packed = raw.reshape(grid.shape + (7,))
    abar = np.empty(grid.shape + (3, 3))
    for c, (i, j) in enumerate(A_COMPONENTS):
        abar[..., i, j] = packed[..., c]
        abar[..., j, i] = packed[..., c]
    return CoefficientField(grid, float(header["t"]), float(header["gamma"]), abar,
                            packed[..., 6].copy(), cutoff_radius=header.get("cutoff_radius"))


def save_trajectory(directory: PathLike, fields, prefix: str = "f") -> list:
    """Checkpoint a sequence of fields as <prefix>_0000, <prefix>_0001, ..."""
    directory = Path(directory)
    stems = []
    for i, field in enumerate(fields):
        stem = directory / f"{prefix}_{i:04d}"
        save_field(stem, field)
        stems.append(stem)
    logger.info("wrote %d checkpoints to %s", len(stems), directory)
    return stems


def load_trajectory(directory: PathLike, prefix: str = "f") -> list:
    directory = Path(directory)
    stems = sorted(p.with_suffix("") for p in directory.glob(f"{prefix}_*.json"))
    return [load_field(stem) for stem in stems]
