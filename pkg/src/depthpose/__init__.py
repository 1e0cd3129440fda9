"""Depth observers and relative-pose EKF for two camera-equipped ground robots."""

from .config import ScenarioConfig, load, loads, preset, preset_names, resolve, set_path
from .errors import (
    ConfigError,
    DepthPoseError,
    IoError,
    MalformedMessage,
    MissingRates,
    NonFiniteInput,
    NonPositiveDepth,
    SingularInnovation,
    UnknownPoint,
)
from .harness import RunReport, report_emit, run, sweep

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig", "load", "loads", "preset", "preset_names", "resolve", "set_path",
    "RunReport", "run", "sweep", "report_emit",
    "DepthPoseError", "ConfigError", "IoError", "MalformedMessage", "MissingRates",
    "NonFiniteInput", "NonPositiveDepth", "SingularInnovation", "UnknownPoint",
]
