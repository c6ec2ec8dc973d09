"""Exception hierarchy shared by the library and the command-line front end."""

from __future__ import annotations


class ChaosMobError(Exception):
    """Base class for every error raised by chaos_mobility."""


class ConfigError(ChaosMobError, ValueError):
    """Invalid configuration; the message quotes the violated rule."""


class DimensionError(ChaosMobError, ValueError):
    """State length does not match the system dimension."""


class SeriesError(ChaosMobError, ValueError):
    """A series or map is too short or references unknown components."""


class MissingArtifactError(ChaosMobError, FileNotFoundError):
    def __init__(self, artifact: str, producer: str) -> None:
        super().__init__(
            f"missing upstream artifact '{artifact}': run the '{producer}' subcommand first"
        )
        self.artifact = artifact
        self.producer = producer


class NumericalError(ChaosMobError, RuntimeError):
    """Numerical failure during integration or estimation."""


class DivergenceError(NumericalError):
    def __init__(self, step: int, bound: float) -> None:
        super().__init__(f"trajectory diverged at step {step} (|coord| > {bound:g})")
        self.step = step
        self.bound = bound


class StageOverflowError(NumericalError):
    def __init__(self, stage: int, step: int | None = None) -> None:
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite value in RK4 stage k{stage}{where}")
        self.stage = stage
        self.step = step


class CalibrationError(NumericalError):
    """Not enough crossings to calibrate a section component."""


__all__ = [
    "ChaosMobError",
    "ConfigError",
    "DimensionError",
    "SeriesError",
    "MissingArtifactError",
    "NumericalError",
    "DivergenceError",
    "StageOverflowError",
    "CalibrationError",
]
