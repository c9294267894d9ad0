"""
Counter-based Gaussian random streams for the path simulations.
"""
import logging
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

_KEY_MASK = (1 << 64) - 1


class GaussianGenerator:
    """Hands out independent Philox streams keyed by (seed, stream, block).

    Every block of paths draws from its own stream, so a block's numbers do
    not depend on how many blocks ran before it or on which thread ran it.
    """

    def __init__(self, seed: Optional[int] = None):
        if seed is not None and seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        if seed is None:
            # no seed given: draw one and log it so the run can be reproduced
            seed = int(np.random.SeedSequence().entropy & _KEY_MASK)
            logger.info("GaussianGenerator: random seed: %d", seed)
        else:
            logger.info("GaussianGenerator: seed %d", seed)
        self.seed = int(seed) & _KEY_MASK

    def stream(self, block: int, stream: int = 0) -> np.random.Generator:
        """Generator for one block of one logical stream (e.g. one probe)."""
        key = np.array([self.seed, ((stream & 0xFFFFFFFF) << 32) | (block & 0xFFFFFFFF)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def normals(self, generator: np.random.Generator, n: int, dim: int = 3, antithetic: bool = False) -> np.ndarray:
        """n standard normal vectors; with antithetic pairing the second half mirrors the first."""
        if not antithetic:
            return generator.standard_normal((n, dim))
        if n % 2:
            raise ValueError(f"antithetic draws need an even count, got {n}")
        half = generator.standard_normal((n // 2, dim))
        return np.concatenate([half, -half], axis=0)
