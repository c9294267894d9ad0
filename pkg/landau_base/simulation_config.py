"""
Run configuration: JSON sections parsed into validated dataclasses.
"""
import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .continuation_monitor import THRESHOLD_NAMES, MonitorThresholds
from .errors import ConfigError
from .kernel_stencil import SINGULAR_RULES
from .linear_solver import LinearStepConfig
from .velocity_operator import CROSS_STENCILS
from .moments import p_threshold
from .phase_grid import PhaseGrid, make_grid
from .picard import PicardConfig
from .scenarios import builtin_scenarios, scenario_by_name
from .sde import CorePrior, SdeConfig

EXPERIMENTS = ("solve", "lowerbound", "verify", "moments")
_REQUIRED = object()

Probe = Tuple[float, Tuple[float, ...], Tuple[float, float, float]]


class _Section:
    """One JSON object under a dotted key path; remembers which keys were read."""

    def __init__(self, data: Any, path: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(path, "must be an object")
        self.data = data
        self.path = path
        self.used = set()

    def key_path(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def get(self, key: str, kind: type, default: Any = _REQUIRED,
            check: Optional[Callable[[Any], bool]] = None, reason: str = "") -> Any:
        self.used.add(key)
        path = self.key_path(key)
        if key not in self.data or self.data[key] is None:
            if default is _REQUIRED:
                raise ConfigError(path, "is required")
            return default
        value = self.data[key]
        if kind is bool:
            if not isinstance(value, bool):
                raise ConfigError(path, f"must be true or false, got {value!r}")
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
                raise ConfigError(path, f"must be an integer, got {value!r}")
            value = int(value)
        elif kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
                raise ConfigError(path, f"must be a finite number, got {value!r}")
            value = float(value)
        elif kind is str:
            if not isinstance(value, str):
                raise ConfigError(path, f"must be a string, got {value!r}")
        elif kind is list:
            if not isinstance(value, list):
                raise ConfigError(path, f"must be a list, got {value!r}")
        elif kind is dict:
            if not isinstance(value, dict):
                raise ConfigError(path, f"must be an object, got {value!r}")
        if check is not None and not check(value):
            raise ConfigError(path, reason or f"invalid value {value!r}")
        return value

    def vector(self, key: str, length: Optional[int], default: Any = _REQUIRED) -> Tuple[float, ...]:
        value = self.get(key, list, default)
        if value is default and default is not _REQUIRED:
            return default
        path = self.key_path(key)
        if length is not None and len(value) != length:
            raise ConfigError(path, f"must have {length} entries, got {len(value)}")
        if any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in value):
            raise ConfigError(path, "entries must be numbers")
        return tuple(float(c) for c in value)

    def section(self, key: str) -> "_Section":
        self.used.add(key)
        return _Section(self.data.get(key), self.key_path(key))

    def finish(self):
        for key in self.data:
            if key not in self.used:
                raise ConfigError(self.key_path(key), "unknown key")


@dataclass(frozen=True)
class VerifySettings:
    core_radius: float = 1.0
    ellipticity_range: Tuple[float, float] = (2.0, 16.0)
    ellipticity_samples: int = 12
    tail_window: Tuple[float, float] = (2.5, 5.0)
    T_lower: Optional[float] = None
    C1: float = 1.0
    super_rho: float = 0.5
    envelope_shell: Tuple[float, float] = (2.5, 5.0)
    well_distributed: Optional[Tuple[float, float, float]] = None


@dataclass
class RunConfig:
    """Everything one experiment needs, validated."""
    experiment: str
    grid: PhaseGrid
    gamma: float
    rho0: float
    kappa: Optional[float]
    T_target: float
    picard: PicardConfig
    sde: SdeConfig
    monitor: MonitorThresholds
    p_exponent: Optional[float]
    scenario: str
    scenario_params: Dict[str, Any]
    core: Optional[CorePrior]
    probes: List[Probe]
    verify: VerifySettings
    out_dir: Path
    source: Optional[Path]
    checkpoints: bool
    seed: int
    threads: Optional[int]
    params: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def step(self) -> LinearStepConfig:
        return self.picard.step

    def describe(self) -> str:
        return (f"experiment: {self.experiment} scenario: {self.scenario} gamma: {self.gamma} "
                f"rho0: {self.rho0} T: {self.T_target} dt: {self.step.dt} {self.grid.describe()}")


def _positive(value) -> bool:
    return value > 0


class RunConfigFactory:
    """Builds a RunConfig from parsed JSON."""

    @staticmethod
    def create_config(params: dict) -> RunConfig:
        params = copy.deepcopy(params)
        root = _Section(params, "")
        experiment = root.get("experiment", str, "solve", lambda e: e in EXPERIMENTS,
                              f"must be one of {', '.join(EXPERIMENTS)}")
        seed = root.get("seed", int, 0, lambda s: 0 <= s < 2 ** 64, "must be an unsigned 64-bit integer")
        threads = root.get("threads", int, None, _positive, "must be positive")

        grid = RunConfigFactory._grid(root.section("grid"))

        physics = root.section("physics")
        gamma = physics.get("gamma", float, check=lambda g: -3.0 <= g < 0.0, reason="must lie in [-3, 0)")
        rho0 = physics.get("rho0", float, 0.1, _positive, "must be positive")
        kappa = physics.get("kappa", float, None, _positive, "must be positive")
        T_target = physics.get("T_target", float, check=_positive, reason="must be positive")
        singular_rule = physics.get("singular_rule", str, "lattice", lambda r: r in SINGULAR_RULES,
                                    f"must be one of {', '.join(SINGULAR_RULES)}")
        p_exponent = physics.get("p_exponent", float, None, lambda p: p > p_threshold(gamma),
                                 f"must exceed 3|gamma|/(5+gamma) = {p_threshold(gamma):.4g}")
        physics.finish()
        if kappa is not None and T_target > rho0 / (2.0 * kappa):
            raise ConfigError("physics.T_target", f"exceeds rho0 / (2 kappa) = {rho0 / (2.0 * kappa):.4g}")

        step = RunConfigFactory._step(root.section("step"), threads)
        picard = RunConfigFactory._picard(root.section("picard"), T_target, step, singular_rule, threads)
        sde = RunConfigFactory._sde(root.section("sde"), seed, threads)
        monitor = RunConfigFactory._monitor(root.section("monitor"))

        scenario_section = root.section("scenario")
        names = [s.name for s in builtin_scenarios()]
        scenario = scenario_section.get("name", str, "maxwellian", lambda n: n in names,
                                        f"must be one of {', '.join(names)}")
        scenario_params = scenario_section.get("params", dict, {})
        scenario_section.finish()
        accepted = scenario_by_name(scenario).parameters()
        for key in scenario_params:
            if key not in accepted:
                raise ConfigError(f"scenario.params.{key}",
                                  f"unknown parameter; {scenario} accepts {', '.join(accepted)}")

        core = RunConfigFactory._core(root.section("core"), grid)
        probes = RunConfigFactory._probes(root.get("probes", list, []), grid, T_target)
        verify = RunConfigFactory._verify(root.section("verify"))

        output = root.section("output")
        out_dir = Path(output.get("out_dir", str, "out"))
        source = output.get("source", str, None)
        checkpoints = output.get("checkpoints", bool, True)
        output.finish()
        root.finish()

        if experiment == "verify" and source is None:
            raise ConfigError("output.source", "is required for the verify experiment")

        return RunConfig(experiment, grid, gamma, rho0, kappa, T_target, picard, sde, monitor, p_exponent,
                         scenario, scenario_params, core, probes, verify, out_dir,
                         Path(source) if source is not None else None, checkpoints, seed, threads, params)

    @staticmethod
    def _grid(section: _Section) -> PhaseGrid:
        d_x = section.get("d_x", int, 0, lambda d: d in (0, 1, 3), "must be 0, 1 or 3")
        n_v = section.get("n_v", int, check=lambda n: n >= 8 and n % 2 == 0, reason="must be an even integer >= 8")
        v_max = section.get("V_max", float, check=_positive, reason="must be positive")
        L = section.get("L", float, None, _positive, "must be positive")
        n_x = section.get("n_x", int, None, _positive, "must be positive")
        section.finish()
        if d_x and L is None:
            raise ConfigError("grid.L", "is required when d_x > 0")
        if d_x and n_x is None:
            raise ConfigError("grid.n_x", "is required when d_x > 0")
        return make_grid(d_x, L, n_x, v_max, n_v)

    @staticmethod
    def _step(section: _Section, threads: Optional[int]) -> LinearStepConfig:
        values = dict(
            dt=section.get("dt", float, check=_positive, reason="must be positive"),
            eps=section.get("eps", float, 0.0, lambda e: e >= 0, "must be nonnegative"),
            R_cut=section.get("R_cut", float, None, lambda r: r >= 3, "must be at least 3"),
            theta=section.get("theta", float, 1.0, lambda t: 0.0 <= t <= 1.0, "must lie in [0, 1]"),
            max_cfl=section.get("max_cfl", float, 0.5, _positive, "must be positive"),
            linear_solver=section.get("linear_solver", str, "bicgstab"),
            tol=section.get("tol", float, 1e-10, _positive, "must be positive"),
            max_iter=section.get("max_iter", int, 500, _positive, "must be positive"),
            conserve_moments=section.get("conserve_moments", bool, True),
            mollify_width=section.get("mollify_width", float, 0.0, lambda w: w >= 0, "must be nonnegative"),
            clamp_tolerance=section.get("clamp_tolerance", float, 1e-12, lambda c: c >= 0, "must be nonnegative"),
            clamp_mass_budget=section.get("clamp_mass_budget", float, 1e-8, _positive, "must be positive"),
            cross_stencil=section.get("cross_stencil", str, "monotone", lambda s: s in CROSS_STENCILS,
                                      f"must be one of {', '.join(CROSS_STENCILS)}"),
            n_save=section.get("n_save", int, 1, _positive, "must be positive"),
        )
        section.finish()
        try:
            return LinearStepConfig(workers=threads, **values)
        except ValueError as e:
            raise ConfigError("step", str(e))

    @staticmethod
    def _picard(section: _Section, T_target: float, step: LinearStepConfig, singular_rule: str,
                threads: Optional[int]) -> PicardConfig:
        values = dict(
            window=section.get("window", float, None, _positive, "must be positive"),
            max_outer=section.get("max_outer", int, 12, _positive, "must be positive"),
            contraction_tol=section.get("contraction_tol", float, 0.5, lambda c: 0 < c < 1, "must lie in (0, 1)"),
            window_shrink=section.get("window_shrink", float, 0.5, lambda c: 0 < c < 1, "must lie in (0, 1)"),
            abs_tol=section.get("abs_tol", float, 1e-12, lambda a: a >= 0, "must be nonnegative"),
            rebase_factor=section.get("rebase_factor", float, 1e3, lambda r: r > 1, "must exceed 1"),
            rho_floor=section.get("rho_floor", float, 1e-3, _positive, "must be positive"),
        )
        section.finish()
        try:
            return PicardConfig(T_target, step, singular_rule=singular_rule, threads=threads, **values)
        except ValueError as e:
            raise ConfigError("picard", str(e))

    @staticmethod
    def _sde(section: _Section, seed: int, threads: Optional[int]) -> SdeConfig:
        values = dict(
            R_cut=section.get("R_cut", float, 4.0, lambda r: r >= 1, "must be at least 1"),
            eps=section.get("eps", float, 1e-3, _positive, "must be positive"),
            ds=section.get("ds", float, 0.01, _positive, "must be positive"),
            n_paths=section.get("n_paths", int, 10000, _positive, "must be positive"),
            antithetic=section.get("antithetic", bool, True),
            block_size=section.get("block_size", int, 4096, lambda b: b >= 2 and b % 2 == 0,
                                   "must be an even integer >= 2"),
            landau_scaling=section.get("landau_scaling", bool, True),
        )
        section.finish()
        try:
            return SdeConfig(seed=seed, threads=threads, **values)
        except ValueError as e:
            raise ConfigError("sde", str(e))

    @staticmethod
    def _monitor(section: _Section) -> MonitorThresholds:
        defaults = MonitorThresholds()
        values = {name: section.get(name, float, getattr(defaults, name), _positive, "must be positive")
                  for name in THRESHOLD_NAMES}
        section.finish()
        return MonitorThresholds(**values)

    @staticmethod
    def _core(section: _Section, grid: PhaseGrid) -> Optional[CorePrior]:
        if not section.data:
            return None
        x0 = section.vector("x0", grid.d_x, default=(0.5 * grid.L,) * grid.d_x if grid.d_x else ())
        v0 = section.vector("v0", 3, default=(0.0, 0.0, 0.0))
        r0 = section.get("r0", float, check=_positive, reason="must be positive")
        delta0 = section.get("delta0", float, check=_positive, reason="must be positive")
        section.finish()
        return CorePrior(tuple(x0), tuple(v0), r0, delta0)

    @staticmethod
    def _probes(entries: Sequence, grid: PhaseGrid, T_target: float) -> List[Probe]:
        probes = []
        for i, entry in enumerate(entries):
            section = _Section(entry, f"probes[{i}]")
            t = section.get("t", float, check=lambda t: 0 < t <= T_target * (1 + 1e-12),
                            reason=f"must lie in (0, T_target = {T_target}]")
            x = section.vector("x", grid.d_x, default=())
            v = section.vector("v", 3)
            section.finish()
            probes.append((t, tuple(x), tuple(v)))
        return probes

    @staticmethod
    def _verify(section: _Section) -> VerifySettings:
        def ordered(pair):
            return len(pair) == 2 and 0 < pair[0] < pair[1]

        values = dict(
            core_radius=section.get("core_radius", float, 1.0, _positive, "must be positive"),
            ellipticity_range=section.vector("ellipticity_range", 2, (2.0, 16.0)),
            ellipticity_samples=section.get("ellipticity_samples", int, 12, lambda n: n >= 3, "must be at least 3"),
            tail_window=section.vector("tail_window", 2, (2.5, 5.0)),
            T_lower=section.get("T_lower", float, None, _positive, "must be positive"),
            C1=section.get("C1", float, 1.0, _positive, "must be positive"),
            super_rho=section.get("super_rho", float, 0.5, _positive, "must be positive"),
            envelope_shell=section.vector("envelope_shell", 2, (2.5, 5.0)),
            well_distributed=section.vector("well_distributed", 3, None),
        )
        section.finish()
        for key in ("ellipticity_range", "tail_window", "envelope_shell"):
            if not ordered(values[key]):
                raise ConfigError(f"verify.{key}", "must be an increasing pair of positive numbers")
        if values["well_distributed"] is not None:
            R, delta, r = values["well_distributed"]
            if not (0 < r <= R and delta > 0):
                raise ConfigError("verify.well_distributed", "must be [R, delta, r] with 0 < r <= R and delta > 0")
        return VerifySettings(**values)
