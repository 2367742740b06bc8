"""Rasch difficulty calibration and a difficulty-based cognitive-load proxy."""

from .irt import (
    CalibrationConfig,
    CalibrationResult,
    ResponseMatrix,
    calibrate_jml,
    log_likelihood,
    rasch_probability,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationConfig",
    "CalibrationResult",
    "ResponseMatrix",
    "calibrate_jml",
    "log_likelihood",
    "rasch_probability",
]
