"""
Exception types shared across the solver, the stochastic verifier and the CLI.
"""
from typing import Optional


class LandauError(Exception):
    """Base class for labeled runtime failures."""

    module = "landau"

    def __init__(self, message: str, module: Optional[str] = None):
        super().__init__(message)
        if module is not None:
            self.module = module

    def label(self) -> str:
        """Module-prefixed message used in logs and exit summaries."""
        return f"[{self.module}] {self}"


class ConfigError(LandauError, ValueError):
    """A configuration value failed validation."""

    module = "cli"

    def __init__(self, key_path: str, reason: str):
        super().__init__(f"{key_path}: {reason}")
        self.key_path = key_path
        self.reason = reason


class SolverError(LandauError, RuntimeError):
    """Linear solve divergence, CFL violation or blow-up guard."""

    module = "linear_solver"


class WindowCollapse(SolverError):
    """Adaptive Picard window shrank below one time step."""

    module = "picard"

    def __init__(self, message: str, achieved_horizon: float):
        super().__init__(message)
        self.achieved_horizon = achieved_horizon


class MonitorBreach(LandauError, RuntimeError):
    """A continuation quantity exceeded its threshold."""

    module = "diagnostics"

    def __init__(self, quantity: str, value: float, threshold: float, t: float):
        super().__init__(f"{quantity} = {value:.6g} exceeds threshold {threshold:.6g} at t = {t:.6g}")
        self.quantity = quantity
        self.value = value
        self.threshold = threshold
        self.t = t
