"""Scenario configuration: TOML loading, validation and built-in presets.

Every physical quantity carries its unit in the key name. Unknown keys are
rejected with the dotted path of the offending field.
"""

from __future__ import annotations

import copy
import dataclasses
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .ekf import InnovationModel, NoiseConfig
from .errors import ConfigError
from .geometry import SE2Pose, UnicycleInput
from .observer import DepthObserverGains
from .sim import NoiseSpec, VisibilityPolicy


@dataclass
class InputSegment:
    t_start_s: float = 0.0
    v_mps: float = 0.0
    w_radps: float = 0.0


@dataclass
class RobotConfig:
    initial_pose: list = field(default_factory=lambda: [0.0, 0.0, 0.0])  # x_m, y_m, theta_rad
    inputs: list = field(default_factory=list)  # list[InputSegment]

    def input_at(self, t: float) -> UnicycleInput:
        """Piecewise-constant schedule; the last segment starting at or before ``t`` wins."""
        u = UnicycleInput(0.0, 0.0)
        for seg in self.inputs:
            if seg.t_start_s <= t + 1e-9:
                u = UnicycleInput(seg.v_mps, seg.w_radps)
        return u

    @property
    def pose(self) -> SE2Pose:
        return SE2Pose(*self.initial_pose)


@dataclass
class PointConfig:
    id: int = 0
    camera_a_xyz_m: list = field(default_factory=lambda: [0.0, 0.0, 1.0])


@dataclass
class ObserverConfig:
    H: Any = 2.5  # scalar (times identity) or 2x2 nested list
    alpha: float = 1.0
    lambda_: float = 120.0
    depth_prior_offset_m: float = 1.0
    chi_min: float = 0.01
    chi_max: float = 10.0
    integrator: str = "euler"

    def gains(self) -> DepthObserverGains:
        return DepthObserverGains(np.array(self.H, dtype=float), self.alpha, self.lambda_)


@dataclass
class EkfConfig:
    enabled: bool = True
    symmetric: bool = False
    model: str = "position_level"
    initial_offset: list = field(default_factory=lambda: [1.5, 1.5, 15.0])  # dx_m, dy_m, dtheta_deg
    P0_diag: list = field(default_factory=lambda: [2.25, 2.25, math.radians(15.0) ** 2])
    q_process_diag: list = field(default_factory=lambda: [1e-4, 1e-4, 1e-5])
    r_meas_diag: list = field(default_factory=lambda: [1e-2, 1e-2])
    gate_threshold: float = 9.21  # 0 turns the gate off
    staleness_limit_s: float = 0.2

    def noise(self) -> NoiseConfig:
        gate = self.gate_threshold if self.gate_threshold > 0 else None
        return NoiseConfig(np.diag(self.q_process_diag), np.diag(self.r_meas_diag), gate)


@dataclass
class NoiseConfigSection:
    sigma_s: float = 0.0
    sigma_u: float = 0.0


@dataclass
class VisibilityConfig:
    fov_half_angle_deg: float = 45.0
    min_depth_m: float = 0.1

    def policy(self) -> VisibilityPolicy:
        return VisibilityPolicy(math.radians(self.fov_half_angle_deg), self.min_depth_m)


@dataclass
class TransportConfig:
    kind: str = "inproc"
    loss_rate: float = 0.0
    delay_steps: int = 0
    port_a: int = 47001
    port_b: int = 47002


@dataclass
class MetricsConfig:
    depth_threshold_m: float = 0.05
    depth_relative_threshold: float = 0.05
    translation_threshold_m: float = 0.1
    orientation_threshold_deg: float = 2.0
    pe_window_s: float = 1.0


@dataclass
class ScenarioConfig:
    name: str = "custom"
    duration_s: float = 10.0
    rate_hz: float = 20.0
    seed: int = 0
    robots: dict = field(default_factory=dict)  # "A"/"B" -> RobotConfig
    points: list = field(default_factory=list)  # list[PointConfig]
    observer: ObserverConfig = field(default_factory=ObserverConfig)
    ekf: EkfConfig = field(default_factory=EkfConfig)
    noise: NoiseConfigSection = field(default_factory=NoiseConfigSection)
    visibility: VisibilityConfig = field(default_factory=VisibilityConfig)
    transport: TransportConfig = field(default_factory=TransportConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s * self.rate_hz))

    @property
    def two_robots(self) -> bool:
        return "B" in self.robots

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(self.noise.sigma_s, self.noise.sigma_u, self.seed)

    def to_dict(self) -> dict:
        return to_plain(self)

    def validate(self) -> ScenarioConfig:
        _check(self.rate_hz > 0, "rate_hz", "must be positive")
        _check(self.duration_s > 0, "duration_s", "must be positive")
        _check(abs(self.duration_s * self.rate_hz - self.n_steps) < 1e-6, "duration_s",
               "duration_s * rate_hz must be an integer number of steps")
        _check("A" in self.robots, "robots", "robot A is required")
        _check(set(self.robots) <= {"A", "B"}, "robots", "only robots A and B are supported")
        for rid, r in self.robots.items():
            _check(len(r.initial_pose) == 3, f"robots.{rid}.initial_pose", "needs [x_m, y_m, theta_rad]")
            starts = [s.t_start_s for s in r.inputs]
            _check(starts == sorted(starts), f"robots.{rid}.inputs", "segments must be sorted by t_start_s")
        ids = [p.id for p in self.points]
        _check(len(ids) > 0, "points", "at least one point is required")
        _check(len(set(ids)) == len(ids), "points", f"duplicate point ids {ids}")
        for i, p in enumerate(self.points):
            _check(len(p.camera_a_xyz_m) == 3, f"points[{i}].camera_a_xyz_m", "needs 3 coordinates")
            _check(0 <= p.id < 2 ** 32, f"points[{i}].id", "must fit in uint32")
        if self.two_robots and self.ekf.enabled:
            _check(len(self.points) >= 2, "points", "relative-pose scenarios need at least 2 points")
        try:
            self.observer.gains()
        except ValueError as exc:
            raise ConfigError("observer", str(exc)) from None
        _check(self.observer.integrator in ("euler", "rk4"), "observer.integrator", "must be euler or rk4")
        _check(0 < self.observer.chi_min < self.observer.chi_max, "observer.chi_min",
               "need 0 < chi_min < chi_max")
        _check(self.ekf.model in {m.value for m in InnovationModel}, "ekf.model",
               "must be position_level or velocity_level")
        _check(len(self.ekf.initial_offset) == 3, "ekf.initial_offset", "needs [dx_m, dy_m, dtheta_deg]")
        _check(len(self.ekf.P0_diag) == 3 and min(self.ekf.P0_diag) >= 0, "ekf.P0_diag",
               "needs 3 non-negative entries")
        _check(self.ekf.gate_threshold >= 0, "ekf.gate_threshold", "must be >= 0 (0 disables gating)")
        try:
            self.ekf.noise()
        except ValueError as exc:
            raise ConfigError("ekf", str(exc)) from None
        _check(self.ekf.staleness_limit_s >= 0, "ekf.staleness_limit_s", "must be non-negative")
        _check(self.noise.sigma_s >= 0 and self.noise.sigma_u >= 0, "noise", "sigmas must be >= 0")
        _check(0 < self.visibility.fov_half_angle_deg < 90, "visibility.fov_half_angle_deg",
               "must lie in (0, 90)")
        _check(self.transport.kind in ("inproc", "udp"), "transport.kind", "must be inproc or udp")
        _check(0 <= self.transport.loss_rate < 1, "transport.loss_rate", "must lie in [0, 1)")
        _check(self.transport.delay_steps >= 0, "transport.delay_steps", "must be >= 0")
        return self


def _check(ok: bool, path: str, msg: str) -> None:
    if not ok:
        raise ConfigError(path, msg)


# TOML key -> dataclass field where the name is a Python keyword
_KEY_ALIASES = {"lambda": "lambda_"}
_FIELD_ALIASES = {v: k for k, v in _KEY_ALIASES.items()}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", f"expected a table, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = _KEY_ALIASES.get(key, key)
        sub = f"{path}.{key}" if path else key
        if name not in fields:
            raise ConfigError(sub, "unknown key")
        kwargs[name] = _convert(cls, name, value, sub, fields[name])
    return cls(**kwargs)


_NESTED = {
    "observer": ObserverConfig,
    "ekf": EkfConfig,
    "noise": NoiseConfigSection,
    "visibility": VisibilityConfig,
    "transport": TransportConfig,
    "metrics": MetricsConfig,
}


def _convert(cls, name: str, value, path: str, f: dataclasses.Field):
    if cls is ScenarioConfig and name in _NESTED:
        return _build(_NESTED[name], value, path)
    if cls is ScenarioConfig and name == "robots":
        if not isinstance(value, dict):
            raise ConfigError(path, "expected a table of robots")
        return {rid: _build(RobotConfig, r, f"{path}.{rid}") for rid, r in value.items()}
    if cls is ScenarioConfig and name == "points":
        if not isinstance(value, list):
            raise ConfigError(path, "expected an array of tables")
        return [_build(PointConfig, p, f"{path}[{i}]") for i, p in enumerate(value)]
    if cls is RobotConfig and name == "inputs":
        if not isinstance(value, list):
            raise ConfigError(path, "expected an array of tables")
        return [_build(InputSegment, s, f"{path}[{i}]") for i, s in enumerate(value)]
    if cls is ObserverConfig and name == "H":
        arr = _coerce(value, [], path)
        if np.ndim(arr) not in (0, 2):
            raise ConfigError(path, "expected a scalar or a 2x2 matrix")
        return float(arr) if np.ndim(arr) == 0 else arr
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    return _coerce(value, default, path)


def _coerce(value, default, path: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(path, "must be finite")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    # lists / matrices / scalar-or-matrix fields
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected numbers, got {value!r}") from None
    if not np.isfinite(arr).all():
        raise ConfigError(path, "must be finite")
    return value


def from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data, "").validate()


def loads(text: str) -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<toml>", str(exc)) from None
    return from_dict(data)


def load(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    return loads(text)


def to_plain(obj):
    """Config dataclasses to JSON-ready builtins, using the TOML key names."""
    if dataclasses.is_dataclass(obj):
        return {_FIELD_ALIASES.get(f.name, f.name): to_plain(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def set_path(config: ScenarioConfig, path: str, value) -> ScenarioConfig:
    """Return a validated copy of ``config`` with the dotted ``path`` replaced.

    Path segments may index lists, e.g. ``robots.A.inputs.0.v_mps``.
    """
    data = config.to_dict()
    keys = path.split(".")
    node = data
    try:
        for k in keys[:-1]:
            node = node[int(k)] if isinstance(node, list) else node[k]
        last = keys[-1]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            if last not in node:
                raise KeyError(last)
            node[last] = value
    except (KeyError, IndexError, ValueError, TypeError):
        raise ConfigError(path, "no such parameter") from None
    return from_dict(data)


def preset_names() -> list[str]:
    files = resources.files("depthpose.presets").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".toml"))


def preset(name: str) -> ScenarioConfig:
    f = resources.files("depthpose.presets").joinpath(f"{name}.toml")
    if not f.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {preset_names()}")
    return loads(f.read_text())


def resolve(spec: str) -> ScenarioConfig:
    """A preset name or a path to a TOML file."""
    if spec in preset_names():
        return preset(spec)
    return load(spec)


def clone(config: ScenarioConfig) -> ScenarioConfig:
    return copy.deepcopy(config)
