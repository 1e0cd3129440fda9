"""Ground-truth world of two unicycle robots and static landmarks.

World frame: X, Y in the ground plane, Z up. Each camera sits at its
robot's origin at height zero, so the camera ``y_bar`` (pointing down) of a
landmark is ``-Z`` for any planar pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import UnknownPoint
from .geometry import (
    CameraPoint,
    NormalizedFeature,
    SE2Pose,
    UnicycleInput,
    relative_pose,
    unicycle_step,
)

AGENTS = ("A", "B")


@dataclass(frozen=True)
class WorldState:
    pose_A: SE2Pose
    pose_B: SE2Pose
    points: tuple = ()  # ((point_id, np.ndarray world xyz), ...)
    time: float = 0.0

    def __post_init__(self):
        ids = [pid for pid, _ in self.points]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate point ids: {ids}")

    def pose(self, agent: str) -> SE2Pose:
        if agent == "A":
            return self.pose_A
        if agent == "B":
            return self.pose_B
        raise ValueError(f"unknown agent {agent!r}")

    def point(self, point_id: int) -> np.ndarray:
        for pid, p in self.points:
            if pid == point_id:
                return p
        raise UnknownPoint(point_id)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_s: float = 0.0
    sigma_u: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_s < 0.0 or self.sigma_u < 0.0:
            raise ValueError("noise standard deviations must be non-negative")


@dataclass(frozen=True)
class VisibilityPolicy:
    fov_half_angle: float = math.radians(45.0)
    min_depth: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.fov_half_angle < 0.5 * math.pi:
            raise ValueError("fov_half_angle must lie in (0, pi/2)")

    def visible(self, p: CameraPoint) -> bool:
        if p.z_bar < self.min_depth:
            return False
        # angle between the viewing ray and the optical axis
        return math.atan2(math.hypot(p.x_bar, p.y_bar), p.z_bar) <= self.fov_half_angle


def camera_frame_point(pose: SE2Pose, p_world) -> CameraPoint:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    dx, dy = p_world[0] - pose.x, p_world[1] - pose.y
    fwd = c * dx + s * dy
    left = -s * dx + c * dy
    return CameraPoint(-left, -float(p_world[2]), fwd)


def camera_to_world(pose: SE2Pose, p: CameraPoint) -> np.ndarray:
    """Inverse of :func:`camera_frame_point`."""
    fwd, left = p.z_bar, -p.x_bar
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return np.array([pose.x + c * fwd - s * left, pose.y + s * fwd + c * left, -p.y_bar])


def world_step(world: WorldState, u_A: UnicycleInput, u_B: UnicycleInput, dt: float) -> WorldState:
    return replace(
        world,
        pose_A=unicycle_step(world.pose_A, u_A, dt),
        pose_B=unicycle_step(world.pose_B, u_B, dt),
        time=world.time + dt,
    )


def observe(world: WorldState, agent: str, noise: NoiseSpec | None = None,
            policy: VisibilityPolicy | None = None,
            rng: np.random.Generator | None = None) -> list[tuple[int, NormalizedFeature]]:
    """Normalized features of the landmarks visible to ``agent``, sorted by id.

    Noise draws come from ``rng`` (two normals per visible point, in id order);
    with ``sigma_s == 0`` no draws are made.
    """
    policy = policy or VisibilityPolicy()
    pose = world.pose(agent)
    sigma = noise.sigma_s if noise is not None else 0.0
    if sigma > 0.0 and rng is None:
        rng = np.random.default_rng(noise.seed)
    out = []
    for pid, p in sorted(world.points, key=lambda t: t[0]):
        cp = camera_frame_point(pose, p)
        if not policy.visible(cp):
            continue
        x, y = cp.x_bar / cp.z_bar, cp.y_bar / cp.z_bar
        if sigma > 0.0:
            nx, ny = rng.normal(0.0, sigma, 2)
            x, y = x + nx, y + ny
        out.append((pid, NormalizedFeature(x, y)))
    return out


def ground_truth(world: WorldState, point_id: int, agent: str) -> tuple[float, SE2Pose]:
    """True optical-axis depth of a landmark for ``agent`` and the true pose of B in A."""
    cp = camera_frame_point(world.pose(agent), world.point(point_id))
    return cp.z_bar, relative_pose(world.pose_A, world.pose_B)


class FeatureTruth(NamedTuple):
    s: NormalizedFeature
    s_rate: NormalizedFeature
    chi: float
    chi_rate: float


def feature_truth(world: WorldState, point_id: int, agent: str, u: UnicycleInput) -> FeatureTruth:
    """Exact feature, inverse depth and their time derivatives under input ``u``.

    Computed from rigid-body kinematics of the landmark in the moving vehicle
    frame, independently of the observer's feature dynamics.
    """
    pose = world.pose(agent)
    p = world.point(point_id)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    dx, dy = p[0] - pose.x, p[1] - pose.y
    fwd = c * dx + s * dy
    left = -s * dx + c * dy
    v, w = u
    # d/dt of R(theta)^T (p - r): -w * perp - R^T r_dot, with r_dot = v (cos, sin)
    fwd_dot = w * left - v
    left_dot = -w * fwd
    x_bar, y_bar, z_bar = -left, -float(p[2]), fwd
    x_bar_dot, z_bar_dot = -left_dot, fwd_dot
    x = x_bar / z_bar
    y = y_bar / z_bar
    x_dot = (x_bar_dot * z_bar - x_bar * z_bar_dot) / (z_bar * z_bar)
    y_dot = -y_bar * z_bar_dot / (z_bar * z_bar)
    chi = 1.0 / z_bar
    chi_dot = -z_bar_dot / (z_bar * z_bar)
    return FeatureTruth(NormalizedFeature(x, y), NormalizedFeature(x_dot, y_dot), chi, chi_dot)


@dataclass
class Simulator:
    """Stateful stepping wrapper with a single seeded noise stream."""

    world: WorldState
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    policy: VisibilityPolicy = field(default_factory=VisibilityPolicy)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.noise.seed)

    def observe(self, agent: str):
        return observe(self.world, agent, self.noise, self.policy, self.rng)

    def measured_input(self, u: UnicycleInput) -> UnicycleInput:
        if self.noise.sigma_u > 0.0:
            nv, nw = self.rng.normal(0.0, self.noise.sigma_u, 2)
            return UnicycleInput(u[0] + nv, u[1] + nw)
        return UnicycleInput(*u)

    def step(self, u_A, u_B, dt: float, time: float | None = None) -> WorldState:
        self.world = world_step(self.world, u_A, u_B, dt)
        if time is not None:
            # pin the clock to k / rate instead of accumulating dt
            self.world = replace(self.world, time=time)
        return self.world


def points_from_camera_a(pose_A: SE2Pose, points_cam) -> tuple:
    """Convert landmarks given in robot A's t=0 camera frame to world coordinates."""
    return tuple((pid, camera_to_world(pose_A, CameraPoint(*xyz))) for pid, xyz in points_cam)
