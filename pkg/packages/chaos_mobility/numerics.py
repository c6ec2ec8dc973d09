"""Shared numerical tolerance constants for section and map tooling."""

PLANE_TOL = 1e-9
ROOT_XTOL = 1e-14
DIVERGENCE_BOUND = 1e6
MAX_BUILTIN_DT = 0.1
CALIBRATION_MARGIN = 0.01
OUT_OF_CALIBRATION_FRACTION = 0.05
MIN_CALIBRATION_CROSSINGS = 10
TANGENCY_STEPS = 10

__all__ = [
    "PLANE_TOL",
    "ROOT_XTOL",
    "DIVERGENCE_BOUND",
    "MAX_BUILTIN_DT",
    "CALIBRATION_MARGIN",
    "OUT_OF_CALIBRATION_FRACTION",
    "MIN_CALIBRATION_CROSSINGS",
    "TANGENCY_STEPS",
]
