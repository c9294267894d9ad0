"""
Shared runner: argument parsing, configuration loading, logging setup and the
self-describing output directory.
"""
import argparse
import hashlib
import json
import logging
import os
import platform
import time
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import scipy

from .errors import ConfigError, LandauError, MonitorBreach, WindowCollapse
from .experiment_result import ExperimentResult
from .experiments import create_experiment
from .simulation_config import RunConfig, RunConfigFactory

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_COLLAPSE = 2
EXIT_BREACH = 3
EXIT_SOLVER = 4

FORMATS = """# Output formats

All CSV files follow RFC 4180 (comma separated, CRLF line ends, header row).
Floats are written with Python's shortest round-trip representation.

- `config.json`: the configuration this run used, after command-line and
  environment overrides.
- `manifest.json`: sha256 of the canonical configuration, git-style blob
  hashes of every input file, wall time, library versions and exit status.
- `moments.csv`: one row per (t, x): t, x1.., M, E, H, P, P1, P2, P3
  (mass, energy, entropy, p-th moment and momentum densities).
- `norms.csv`: per stored step of each window, in the framed variable: t,
  H00, H01, H20 (squared uniformly local norms), Y0_accum, clamp_mass.
- `picard.csv`: one row per Picard iteration: window, t0, T_window, rho,
  iteration, distance, ratio, converged, shrinks.
- `checkpoints/f_XXXX.f64`: raw little-endian float64 samples of f in
  C order over (x_1.., v_1, v_2, v_3); `f_XXXX.json` holds the grid
  (d_x, L, n_x, V_max, n_v), t, gamma and frame.
- `lowerbound.csv`: one row per probe: t, x1.., v1, v2, v3, estimate,
  std_error, hits, n_paths. A probe with zero hits is inconclusive.
- `verify.json`: ellipticity fit, tail fits, comparison-function sign
  reports, envelope ratios and well-distributedness.
- `ellipticity.csv`: speed, min_eig, min_eig_perp.
- `tail.csv`: t, nu, rho, beta, v_low, v_high, r2, n_points.
"""


def parse_simulation_args(description: str = "Landau equation experiments") -> argparse.ArgumentParser:
    """Create argument parser with the common run arguments."""
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument(
        "--config",
        required=True,
        help="Path to a JSON run configuration (see scenarios/)"
    )
    parser.add_argument(
        "--out",
        default=None,
        help="Output directory (overrides LANDAU_OUT_DIR and output.out_dir)"
    )
    parser.add_argument(
        "--seed",
        default=None,
        type=int,
        help="Random seed for the path simulations (overrides the config)"
    )
    parser.add_argument(
        "--threads",
        default=None,
        type=int,
        help="Thread-count hint; never changes results (overrides LANDAU_THREADS)"
    )
    parser.add_argument(
        "--experiment",
        choices=["solve", "lowerbound", "verify", "moments"],
        default=None,
        help="Experiment to run (overrides the config)"
    )
    parser.add_argument(
        "--source",
        default=None,
        help="Finished solve directory read by verify and moments"
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Enable debug logging"
    )
    return parser


def configure_logging(verbose: bool = False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)
    logging.captureWarnings(True)


def load_params(args: argparse.Namespace) -> dict:
    """Read the config file and apply overrides: flags beat environment variables beat file values."""
    try:
        with open(args.config) as f:
            params = json.load(f)
    except OSError as e:
        raise ConfigError("--config", f"cannot read {args.config}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise ConfigError("--config", f"invalid JSON: {e}")
    if not isinstance(params, dict):
        raise ConfigError("--config", "top level must be an object")

    output = params.setdefault("output", {})
    if not isinstance(output, dict):
        raise ConfigError("output", "must be an object")
    out_dir = args.out or os.environ.get("LANDAU_OUT_DIR")
    if out_dir:
        output["out_dir"] = out_dir
    if args.source:
        output["source"] = args.source
    threads = args.threads
    if threads is None and os.environ.get("LANDAU_THREADS"):
        try:
            threads = int(os.environ["LANDAU_THREADS"])
        except ValueError:
            raise ConfigError("LANDAU_THREADS", f"must be an integer, got {os.environ['LANDAU_THREADS']!r}")
    if threads is not None:
        params["threads"] = threads
    if args.seed is not None:
        params["seed"] = args.seed
    if args.experiment is not None:
        params["experiment"] = args.experiment
    return params


def setup_simulation(args: argparse.Namespace) -> RunConfig:
    """Validate the configuration and prepare the output directory."""
    config = RunConfigFactory.create_config(load_params(args))
    if args.verbose:
        print(f"Configuration: {config.describe()}")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    with open(config.out_dir / "config.json", "w") as f:
        json.dump(config.params, f, indent=2, sort_keys=True)
    with open(config.out_dir / "FORMATS.md", "w") as f:
        f.write(FORMATS)
    return config


def canonical_hash(params: dict) -> str:
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def blob_hash(path: Path) -> str:
    """Git's object id of a file: sha1 over 'blob <size>\\0' + contents."""
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def input_files(config: RunConfig, config_path: Optional[str]) -> List[Path]:
    files = [Path(config_path)] if config_path else []
    if config.source is not None:
        files.extend(sorted((config.source / "checkpoints").glob("f_*.*")))
    return files


def write_manifest(config: RunConfig, config_path: Optional[str], status: int, wall_time: float,
                   outputs: List[str], error: Optional[str] = None):
    manifest = {
        "experiment": config.experiment,
        "config_sha256": canonical_hash(config.params),
        "inputs": {str(p): blob_hash(p) for p in input_files(config, config_path) if p.exists()},
        "outputs": outputs,
        "wall_time_s": wall_time,
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "exit_status": status,
    }
    if error is not None:
        manifest["error"] = error
    with open(config.out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


def exit_status(error: Exception) -> int:
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, WindowCollapse):
        return EXIT_COLLAPSE
    if isinstance(error, MonitorBreach):
        return EXIT_BREACH
    if isinstance(error, ValueError) and not isinstance(error, LandauError):
        # inputs that only turn out inconsistent once the run is under way
        return EXIT_CONFIG
    return EXIT_SOLVER


def run_simulation(config: RunConfig, config_path: Optional[str] = None) -> Tuple[Optional[ExperimentResult], int]:
    """Run the configured experiment, write its outputs and the manifest."""
    experiment = create_experiment(config)
    logger.info("running %s: %s", experiment.name, config.describe())
    start = time.perf_counter()
    try:
        result = experiment.run()
    except LandauError as e:
        status = exit_status(e)
        logger.error("%s", e.label())
        if isinstance(e, WindowCollapse):
            logger.error("achieved horizon %.6g", e.achieved_horizon)
        write_manifest(config, config_path, status, time.perf_counter() - start, [], e.label())
        return None, status
    except ValueError as e:
        status = exit_status(e)
        label = f"[{experiment.name}] {e}"
        logger.error("%s", label)
        write_manifest(config, config_path, status, time.perf_counter() - start, [], label)
        return None, status
    outputs = result.write(config.out_dir)
    status = result.status
    write_manifest(config, config_path, status, time.perf_counter() - start, outputs)
    return result, status
