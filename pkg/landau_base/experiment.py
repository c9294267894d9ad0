"""
Abstract base class for experiments.
"""
from abc import ABC, abstractmethod

from .experiment_result import ExperimentResult


class Experiment(ABC):
    """One runnable experiment kind."""

    @abstractmethod
    def run(self) -> ExperimentResult:
        """Run the experiment and return its result."""
        pass

    @property
    @abstractmethod
    def name(self) -> str:
        """Experiment kind as named in the config."""
        pass
