"""
Concrete experiments: deterministic solve, stochastic lower bounds, structural
verification of a finished solve, and moment tables.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .collision_coefficients import CoefficientField, compute_coefficients
from .comparison import (EnvelopeReport, SignReport, SubsolutionParams, envelope_check, find_supersolution,
                         subsolution_residual, supersolution_residual)
from .continuation_monitor import ContinuationMonitor
from .diagnostics import (EllipticityReport, TailFit, WellDistributedReport, default_ellipticity_samples,
                          ellipticity_verify, fit_tail, well_distributed_check)
from .experiment import Experiment
from .experiment_result import ExperimentResult, write_csv
from .field_io import load_trajectory, save_trajectory
from .kernel_stencil import precompute_stencil
from .moments import MomentField, moments
from .phase_grid import DistributionField, PhaseGrid
from .picard import LandauSolution, solve_landau
from .scenarios import scenario_by_name
from .sde import CorePrior, ProbeResult, SnapshotCoefficients, core_spreading_experiment, spreading_exponent
from .simulation_config import Probe, RunConfig

logger = logging.getLogger(__name__)


def initial_field(config: RunConfig) -> DistributionField:
    scenario = scenario_by_name(config.scenario)
    return scenario.build(config.grid, config.gamma, **config.scenario_params)


def run_solve(config: RunConfig, f_in: Optional[DistributionField] = None) -> LandauSolution:
    f_in = f_in if f_in is not None else initial_field(config)
    stencil = precompute_stencil(config.grid, config.gamma, config.picard.singular_rule)
    monitor = ContinuationMonitor(config.gamma, config.monitor, config.p_exponent)
    return solve_landau(f_in, config.gamma, config.rho0, config.T_target, config.picard, kappa=config.kappa,
                        stencil=stencil, monitor=monitor, p_exponent=config.p_exponent)


def conservation_summary(series: Sequence[MomentField]) -> Dict[str, float]:
    """Relative mass and energy drift, momentum drift and the largest entropy increase between snapshots."""
    totals = [m.total() for m in series]
    first, last = totals[0], totals[-1]
    momentum = [np.array([t["P1"], t["P2"], t["P3"]]) for t in totals]
    entropy = np.array([t["H"] for t in totals])
    return {
        "mass_drift": abs(last["M"] - first["M"]) / first["M"] if first["M"] else 0.0,
        "energy_drift": abs(last["E"] - first["E"]) / first["E"] if first["E"] else 0.0,
        "momentum_drift": float(np.linalg.norm(momentum[-1] - momentum[0])),
        "entropy_increase": float(np.max(np.diff(entropy), initial=0.0)),
    }


def moment_rows(series: Sequence[MomentField]):
    for m in series:
        yield from m.rows()


@dataclass
class SolveResult(ExperimentResult):
    solution: LandauSolution
    checkpoints: bool = True

    def print_details(self):
        for window in self.solution.windows:
            window.print_details()
        summary = conservation_summary(self.solution.moments)
        print(f"t = {self.solution.final.t:.4g}: " + ", ".join(f"{k} {v:.3e}" for k, v in summary.items()))

    def picard_rows(self):
        for index, window in enumerate(self.solution.windows):
            for iteration, distance in enumerate(window.distances):
                yield {"window": index, "t0": window.t0, "T_window": window.T_window, "rho": window.weight.rho0,
                       "iteration": iteration + 1, "distance": distance,
                       "ratio": window.ratios[iteration - 1] if iteration >= 1 else "",
                       "converged": int(window.converged), "shrinks": window.shrinks}

    def write(self, out_dir: Path) -> List[str]:
        write_csv(out_dir / "moments.csv", moment_rows(self.solution.moments))
        write_csv(out_dir / "norms.csv", self.solution.norm_rows)
        write_csv(out_dir / "picard.csv", self.picard_rows())
        names = ["moments.csv", "norms.csv", "picard.csv"]
        if self.checkpoints:
            save_trajectory(out_dir / "checkpoints", self.solution.fields)
            names.append("checkpoints/")
        return names


class SolveExperiment(Experiment):
    def __init__(self, config: RunConfig):
        self.config = config

    @property
    def name(self) -> str:
        return "solve"

    def run(self) -> SolveResult:
        return SolveResult(run_solve(self.config), self.config.checkpoints)


def default_core(config: RunConfig) -> CorePrior:
    """The vacuum-core scenario's core, or a unit-height core at the domain center."""
    params = dict(config.scenario_params)
    grid = config.grid
    x0 = params.get("x0") or ((0.5 * grid.L,) * grid.d_x if grid.d_x else ())
    return CorePrior(tuple(x0), tuple(params.get("v0", (0.0, 0.0, 0.0))), params.get("r0", 0.75),
                     params.get("delta0", 1.0))


def default_probes(core: CorePrior, grid: PhaseGrid, t: float) -> List[Probe]:
    """Ten probes: the core center at two times, velocities leaving the core, and, when the torus
    is present, distant positions paired with the transport velocity (x - x0) / t."""
    x0 = tuple(core.x0)
    v0 = np.asarray(core.v0)
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0])
    probes: List[Probe] = [(t, x0, tuple(v0)), (0.5 * t, x0, tuple(v0))]
    for factor in (1.5, 2.5, 3.5):
        probes.append((t, x0, tuple(v0 + factor * core.r0 * e1)))
    probes.append((t, x0, tuple(v0 + 2.0 * core.r0 * e2)))
    if grid.d_x:
        for d in (2.0 * core.r0, -2.0 * core.r0, 3.0 * core.r0, -3.0 * core.r0):
            d = float(np.clip(d, -0.5 * grid.L, 0.5 * grid.L))
            x = np.array(x0, dtype=np.float64)
            x[0] = np.mod(x[0] + d, grid.L)
            probes.append((t, tuple(x), tuple(v0 + (d / t) * e1)))
    else:
        for factor in (4.5, 5.5, 6.5, 7.5):
            probes.append((t, x0, tuple(v0 + factor * core.r0 * e1)))
    return probes


@dataclass
class LowerBoundResult(ExperimentResult):
    solution: LandauSolution
    core: CorePrior
    probes: List[ProbeResult]
    exponent: Optional[float] = None

    @property
    def min_mass(self) -> float:
        return float(np.min(self.solution.moments[-1].M))

    def print_details(self):
        print(f"minimum spatial mass density at t = {self.solution.final.t:.4g}: {self.min_mass:.4e}")
        for p in self.probes:
            flag = " (inconclusive)" if p.inconclusive else ""
            print(f"t={p.t:.3g} x={p.x} v={tuple(round(c, 3) for c in p.v)}: "
                  f"{p.estimate:.4e} +- {p.std_error:.2e}, hits {p.hits}/{p.n_paths}{flag}")
        if self.exponent is not None:
            print(f"fitted spreading exponent: {self.exponent:.3f}")

    def write(self, out_dir: Path) -> List[str]:
        write_csv(out_dir / "lowerbound.csv", (p.row() for p in self.probes))
        write_csv(out_dir / "moments.csv", moment_rows(self.solution.moments))
        return ["lowerbound.csv", "moments.csv"]


class LowerBoundExperiment(Experiment):
    def __init__(self, config: RunConfig):
        self.config = config

    @property
    def name(self) -> str:
        return "lowerbound"

    def run(self) -> LowerBoundResult:
        config = self.config
        f_in = initial_field(config)
        solution = run_solve(config, f_in)
        stencil = precompute_stencil(config.grid, config.gamma, config.picard.singular_rule)
        snapshots = [compute_coefficients(f, stencil, workers=config.threads) for f in solution.fields]
        model = SnapshotCoefficients(snapshots, config.sde.R_cut, config.sde.eps)
        core = config.core or default_core(config)
        probes = config.probes or default_probes(core, config.grid, config.T_target)
        results = core_spreading_experiment(core, probes, model, config.sde, f_in=f_in)
        return LowerBoundResult(solution, core, results, spreading_exponent(results, core))


@dataclass
class VerifyResult(ExperimentResult):
    ellipticity: Optional[EllipticityReport]
    tails: List[TailFit]
    subsolution: Optional[SignReport]
    control: Optional[SignReport]
    supersolution: Optional[SignReport]
    envelope: Optional[EnvelopeReport]
    well_distributed: Optional[WellDistributedReport]
    gamma: float
    errors: Dict[str, str] = field(default_factory=dict)

    @property
    def status(self) -> int:
        return 0 if not self.errors else 1

    def print_details(self):
        for report in (self.well_distributed, self.ellipticity, self.subsolution, self.control,
                       self.supersolution, self.envelope):
            if report is not None:
                report.print_details()
        for fit in self.tails:
            print(f"tail t={fit.t:.4g}: beta={fit.beta:.3f} rho={fit.rho:.4g} nu={fit.nu:.4g} (R2 {fit.r2:.4f})")
        for name, message in self.errors.items():
            print(f"{name}: {message}")

    def summary(self) -> dict:
        out = {"gamma": self.gamma, "errors": self.errors}
        if self.ellipticity is not None:
            e = self.ellipticity
            out["ellipticity"] = {"c_fit": e.c_fit, "slope_all": e.slope_all, "c_fit_perp": e.c_fit_perp,
                                  "slope_perp": e.slope_perp, "r2_all": e.r2_all, "r2_perp": e.r2_perp,
                                  "v_range": list(e.v_range), "lambda0": e.lambda0,
                                  "passes": e.passes(self.gamma)}
        out["tails"] = [fit.row() for fit in self.tails]
        for name in ("subsolution", "control", "supersolution"):
            report = getattr(self, name)
            if report is not None:
                out[name] = {"fraction": report.fraction, "n_nodes": report.n_nodes, "worst": report.worst,
                             "parameters": report.parameters, "threshold": report.threshold,
                             "passed": report.passed}
        if self.envelope is not None:
            out["envelope"] = {"K": self.envelope.K, "holds": self.envelope.holds,
                               "ratios": [[t, r] for t, r in self.envelope.ratios]}
        if self.well_distributed is not None:
            w = self.well_distributed
            out["well_distributed"] = {"holds": w.holds, "R": w.R, "delta": w.delta, "r": w.r,
                                       "failing": [list(x) for x in w.failing]}
        return out

    def write(self, out_dir: Path) -> List[str]:
        with open(out_dir / "verify.json", "w") as f:
            json.dump(self.summary(), f, indent=2, sort_keys=True)
        names = ["verify.json"]
        if self.ellipticity is not None:
            write_csv(out_dir / "ellipticity.csv", self.ellipticity.rows())
            names.append("ellipticity.csv")
        write_csv(out_dir / "tail.csv", (fit.row() for fit in self.tails))
        names.append("tail.csv")
        return names


def measured_core(f: DistributionField, x0, v0, r0: float) -> CorePrior:
    """The largest delta0 with f >= delta0 on the velocity nodes of B_r0(v0) at the node nearest x0."""
    grid = f.grid
    if grid.d_x:
        index = tuple(int(i) % grid.n_x for i in np.round(np.mod(np.asarray(x0)[:grid.d_x], grid.L) / grid.h_x))
    else:
        index = ()
    speed = np.sqrt(sum((c - v) ** 2 for c, v in zip(grid.velocity_mesh(), v0)))
    inside = speed < r0
    if not np.any(inside):
        raise ValueError(f"core radius {r0} holds no velocity node")
    delta0 = float(f.values[index][inside].min())
    if delta0 <= 0.0:
        raise ValueError(f"f vanishes inside B_{r0}({tuple(v0)}); no mass core")
    return CorePrior(tuple(x0), tuple(v0), r0, delta0)


class VerifyExperiment(Experiment):
    """Ellipticity, tail, comparison-function and envelope checks on a finished solve."""

    def __init__(self, config: RunConfig):
        self.config = config

    @property
    def name(self) -> str:
        return "verify"

    def run(self) -> VerifyResult:
        config = self.config
        settings = config.verify
        fields = load_trajectory(config.source / "checkpoints")
        if not fields:
            raise ValueError(f"no checkpoints found under {config.source / 'checkpoints'}")
        gamma = fields[0].gamma
        grid = fields[0].grid
        final = fields[-1]
        stencil = precompute_stencil(grid, gamma, config.picard.singular_rule)
        errors: Dict[str, str] = {}

        well = None
        if settings.well_distributed is not None:
            R, delta, r = settings.well_distributed
            try:
                well = well_distributed_check(fields[0], R, delta, r)
            except ValueError as e:
                errors["well_distributed"] = str(e)

        ellipticity = None
        x0 = config.core.x0 if config.core else ((0.5 * grid.L,) * grid.d_x if grid.d_x else ())
        v0 = config.core.v0 if config.core else (0.0, 0.0, 0.0)
        try:
            core = measured_core(final, x0, v0, settings.core_radius)
            samples = default_ellipticity_samples(core, settings.ellipticity_range, settings.ellipticity_samples)
            ellipticity = ellipticity_verify(final, stencil, core, samples)
        except ValueError as e:
            errors["ellipticity"] = str(e)

        tails = []
        for x_index in grid.spatial_indices():
            try:
                tails.append(fit_tail(final, x_index, settings.tail_window))
            except ValueError as e:
                errors[f"tail{list(x_index)}"] = str(e)

        snapshots: List[CoefficientField] = [compute_coefficients(f, stencil, workers=config.threads)
                                             for f in fields]
        T_lower = settings.T_lower if settings.T_lower is not None else final.t
        subsolution = control = supersolution = envelope = None
        params = SubsolutionParams(T_lower, settings.C1)
        try:
            subsolution = subsolution_residual(snapshots, params)
            control = subsolution_residual(snapshots, params, beta_fn=lambda t: (1.0, 0.0))
        except ValueError as e:
            errors["subsolution"] = str(e)
        try:
            super_params = find_supersolution(snapshots, settings.super_rho, t0=fields[0].t)
            supersolution = supersolution_residual(snapshots, super_params, t0=fields[0].t)
            envelope = envelope_check(fields, super_params, settings.envelope_shell)
        except ValueError as e:
            errors["supersolution"] = str(e)
        for name, message in errors.items():
            logger.warning("verify %s: %s", name, message)
        return VerifyResult(ellipticity, tails, subsolution, control, supersolution, envelope, well, gamma, errors)


@dataclass
class MomentsResult(ExperimentResult):
    series: List[MomentField]

    def print_details(self):
        for m in self.series:
            totals = m.total()
            print(f"t={m.t:.4g}: " + ", ".join(f"{k}={v:.6g}" for k, v in totals.items()))

    def write(self, out_dir: Path) -> List[str]:
        write_csv(out_dir / "moments.csv", moment_rows(self.series))
        return ["moments.csv"]


class MomentsExperiment(Experiment):
    """Moments of a finished solve's checkpoints, or of the scenario's initial datum."""

    def __init__(self, config: RunConfig):
        self.config = config

    @property
    def name(self) -> str:
        return "moments"

    def run(self) -> MomentsResult:
        config = self.config
        if config.source is not None:
            fields = load_trajectory(config.source / "checkpoints")
        else:
            fields = [initial_field(config)]
        return MomentsResult([moments(f, config.p_exponent) for f in fields])


EXPERIMENT_TYPES = {
    "solve": SolveExperiment,
    "lowerbound": LowerBoundExperiment,
    "verify": VerifyExperiment,
    "moments": MomentsExperiment,
}


def create_experiment(config: RunConfig) -> Experiment:
    return EXPERIMENT_TYPES[config.experiment](config)
