from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RNG:
    seed: int | None
    algo: str = "pcg64"
    version: str = "numpy"

    def create(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def for_agent(self, agent_id: int) -> np.random.Generator:
        """Independent stream per agent, stable under reordering and parallel runs."""
        base = 0 if self.seed is None else int(self.seed)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([base, int(agent_id)])))

    def describe(self) -> dict[str, object]:
        return {"seed": self.seed, "algo": self.algo, "version": self.version}


def sample_ball(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    """Uniform sample inside a ``dim``-ball of the given radius."""
    direction = rng.standard_normal(dim)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        return np.zeros(dim)
    r = radius * rng.random() ** (1.0 / dim)
    return direction * (r / norm)
