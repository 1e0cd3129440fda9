"""Planar and camera-frame geometry shared by the filters and the simulator.

Frame conventions
-----------------
Camera: x right, y down, z forward (optical axis).
Vehicle: X forward, Y left, angles counter-clockwise. The camera sits at
the vehicle origin, so a camera point maps to the vehicle plane as
``(X, Y) = (z_bar, -x_bar)`` and a positive heading rate turns left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NonPositiveDepth

TWO_PI = 2.0 * math.pi
# below this |w| the arc formula is replaced by its straight-line limit
STRAIGHT_EPS = 1e-9


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]; -pi maps to +pi."""
    w = a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    elif w > math.pi:
        w -= TWO_PI
    return w


class Rot2(NamedTuple):
    angle: float

    @property
    def matrix(self) -> np.ndarray:
        return rot2_matrix(self.angle)

    def inverse(self) -> Rot2:
        return Rot2(-self.angle)


@dataclass(frozen=True)
class SE2Pose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, a) -> SE2Pose:
        return cls(a[0], a[1], a[2])


class CameraPoint(NamedTuple):
    x_bar: float
    y_bar: float
    z_bar: float


class NormalizedFeature(NamedTuple):
    x: float
    y: float


class UnicycleInput(NamedTuple):
    v_d: float
    w_theta: float


class PlanarPoint(NamedTuple):
    px: float
    py: float


def rot2_matrix(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def rot2_apply(R: Rot2 | float, v) -> np.ndarray:
    a = R.angle if isinstance(R, Rot2) else float(R)
    c, s = math.cos(a), math.sin(a)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def skew_scalar(a_dot: float) -> np.ndarray:
    """2-D cross-product matrix: ``S(a) @ v == a * R(pi/2) @ v``."""
    return np.array([[0.0, -a_dot], [a_dot, 0.0]])


def project(p: CameraPoint) -> NormalizedFeature:
    if not p[2] > 0.0:
        raise NonPositiveDepth(f"point has z_bar={p[2]!r}; projection needs z_bar > 0")
    return NormalizedFeature(p[0] / p[2], p[1] / p[2])


def unproject(s: NormalizedFeature, z_bar: float) -> CameraPoint:
    if not z_bar > 0.0:
        raise NonPositiveDepth(f"z_bar={z_bar!r}; must be > 0")
    return CameraPoint(s[0] * z_bar, s[1] * z_bar, float(z_bar))


def camera_to_planar(p: CameraPoint) -> PlanarPoint:
    return PlanarPoint(p[2], -p[0])


def planar_to_camera(m: PlanarPoint, y_bar: float = 0.0) -> CameraPoint:
    return CameraPoint(-m[1], y_bar, m[0])


def unicycle_step(pose: SE2Pose, u: UnicycleInput, dt: float) -> SE2Pose:
    """Exact arc integration of the unicycle over ``dt`` with constant input."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    v, w = u
    th = pose.theta
    dth = w * dt
    if abs(w) < STRAIGHT_EPS:
        dx = v * dt * math.cos(th)
        dy = v * dt * math.sin(th)
    else:
        # chord of length 2(v/w)sin(dth/2) along the mid-arc heading
        chord = 2.0 * (v / w) * math.sin(0.5 * dth)
        mid = th + 0.5 * dth
        dx = chord * math.cos(mid)
        dy = chord * math.sin(mid)
    return SE2Pose(pose.x + dx, pose.y + dy, th + dth)


def relative_pose(pose_a: SE2Pose, pose_b: SE2Pose) -> SE2Pose:
    """Pose of B expressed in the body frame of A."""
    c, s = math.cos(pose_a.theta), math.sin(pose_a.theta)
    dx, dy = pose_b.x - pose_a.x, pose_b.y - pose_a.y
    return SE2Pose(c * dx + s * dy, -s * dx + c * dy, pose_b.theta - pose_a.theta)


def compose(a: SE2Pose, b: SE2Pose) -> SE2Pose:
    """``a ∘ b``: express pose ``b`` (given in frame ``a``) in a's parent frame."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return SE2Pose(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta)


def inverse(a: SE2Pose) -> SE2Pose:
    c, s = math.cos(a.theta), math.sin(a.theta)
    return SE2Pose(-(c * a.x + s * a.y), s * a.x - c * a.y, -a.theta)
