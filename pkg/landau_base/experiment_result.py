"""
Experiment result representation.
"""
import csv
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Iterable, List


def write_csv(path: Path, rows: Iterable[Dict]) -> int:
    """RFC 4180 CSV with the union of row keys as header, in first-seen order."""
    rows = list(rows)
    header: List[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=header, lineterminator="\r\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
    return len(rows)


class ExperimentResult(ABC):
    """Abstract base class for experiment results."""

    @abstractmethod
    def print_details(self):
        """Print a human-readable summary."""
        raise NotImplementedError("print_details is not implemented")

    @abstractmethod
    def write(self, out_dir: Path) -> List[str]:
        """Write output files into out_dir and return their names."""
        pass

    @property
    def status(self) -> int:
        """Exit status of the run (0 when every check it gates on passed)."""
        return 0
