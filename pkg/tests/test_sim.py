import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depthpose.errors import UnknownPoint
from depthpose.geometry import CameraPoint, SE2Pose, UnicycleInput, relative_pose
from depthpose.sim import (
    NoiseSpec,
    Simulator,
    VisibilityPolicy,
    WorldState,
    camera_frame_point,
    camera_to_world,
    feature_truth,
    ground_truth,
    observe,
    points_from_camera_a,
    world_step,
)

from oracles import numeric_feature_rates, random_planar_config

ORIGIN = SE2Pose(0.0, 0.0, 0.0)


def world_with(points, pose_b=SE2Pose(0.0, -2.5, 0.0)):
    return WorldState(ORIGIN, pose_b, tuple((pid, np.asarray(p, float)) for pid, p in points))


def test_straight_drive_covers_distance():
    w = world_with([])
    u = UnicycleInput(0.1, 0.0)
    for _ in range(200):
        w = world_step(w, u, u, 0.05)
    assert w.pose_A.x == pytest.approx(1.0, abs=1e-12)
    assert w.pose_B.y == pytest.approx(-2.5, abs=1e-12)
    assert w.time == pytest.approx(10.0)


def test_equal_straight_inputs_keep_relative_pose():
    # parallel headings, so both robots translate by the same vector
    w = world_with([], SE2Pose(0.3, -1.0, 0.0))
    xi0 = relative_pose(w.pose_A, w.pose_B)
    u = UnicycleInput(0.1, 0.0)
    for _ in range(100):
        w = world_step(w, u, u, 0.05)
    xi = relative_pose(w.pose_A, w.pose_B)
    assert np.allclose([xi.x, xi.y, xi.theta], [xi0.x, xi0.y, xi0.theta], atol=1e-12)


def test_observe_point_ahead_and_behind():
    # 5 m ahead, 5 m to the right, level with the camera
    w = world_with([(3, [5.0, -5.0, 0.0]), (9, [-1.0, 0.0, 0.0])])
    obs = observe(w, "A", policy=VisibilityPolicy(math.radians(60)))
    assert [pid for pid, _ in obs] == [3]
    assert obs[0][1] == pytest.approx((1.0, 0.0))


def test_observe_fov_is_monotone():
    rng = np.random.default_rng(3)
    pts = [(i, [rng.uniform(0.5, 10), rng.uniform(-8, 8), rng.uniform(-3, 3)]) for i in range(60)]
    w = world_with(pts)
    prev = set()
    for deg in (10, 20, 35, 50, 70, 85):
        seen = {pid for pid, _ in observe(w, "A", policy=VisibilityPolicy(math.radians(deg)))}
        assert prev <= seen
        prev = seen
    assert len(prev) > 30


def test_observe_noise_is_seeded():
    w = world_with([(1, [5.0, 0.0, 0.5]), (2, [6.0, 1.0, -0.5])])
    noise = NoiseSpec(sigma_s=0.01, seed=4)
    a = observe(w, "A", noise, rng=np.random.default_rng(4))
    b = observe(w, "A", noise)
    assert a == b
    clean = observe(w, "A")
    draws = np.random.default_rng(4).normal(0.0, 0.01, 4)
    assert a[0][1][0] == pytest.approx(clean[0][1][0] + draws[0], abs=1e-15)
    assert a[1][1][1] == pytest.approx(clean[1][1][1] + draws[3], abs=1e-15)


def test_ground_truth_depth_and_pose():
    w = world_with([(1, [5.0, 0.0, 0.0])])
    z, xi = ground_truth(w, 1, "A")
    assert z == 5.0 and xi == SE2Pose(0.0, -2.5, 0.0)
    u = UnicycleInput(0.1, 0.0)
    for _ in range(200):
        w = world_step(w, u, u, 0.05)
    assert ground_truth(w, 1, "A")[0] == pytest.approx(4.0, abs=1e-12)
    with pytest.raises(UnknownPoint):
        ground_truth(w, 2, "A")


def test_ground_truth_reconstructs_landmark():
    rng = np.random.default_rng(8)
    for _ in range(200):
        world, _, _ = random_planar_config(rng)
        for pid, p in world.points:
            for agent in ("A", "B"):
                z, _ = ground_truth(world, pid, agent)
                (x, y), = [s for q, s in observe(world, agent, policy=VisibilityPolicy(1.5)) if q == pid]
                back = camera_to_world(world.pose(agent), CameraPoint(x * z, y * z, z))
                assert np.allclose(back, p, atol=1e-9)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-math.pi, math.pi),
       st.floats(-10, 10), st.floats(-10, 10), st.floats(-3, 3))
def test_camera_frame_round_trip(x, y, th, px, py, pz):
    pose = SE2Pose(x, y, th)
    p = np.array([px, py, pz])
    assert np.allclose(camera_to_world(pose, camera_frame_point(pose, p)), p, atol=1e-9)


def test_points_given_in_camera_a():
    pts = points_from_camera_a(ORIGIN, [(1, (0.0, 0.0, 5.0)), (4, (5.0, 5.0, 5.0))])
    assert np.allclose(pts[0][1], [5.0, 0.0, 0.0])
    assert np.allclose(pts[1][1], [5.0, -5.0, -5.0])


def test_feature_truth_matches_finite_differences():
    rng = np.random.default_rng(21)
    for _ in range(100):
        world, u_a, u_b = random_planar_config(rng)
        for pid, _ in world.points:
            for agent, u in (("A", u_a), ("B", u_b)):
                ft = feature_truth(world, pid, agent, u)
                s_rate, chi_rate = numeric_feature_rates(world, pid, agent, u)
                assert np.allclose([*ft.s_rate, ft.chi_rate], [*s_rate, chi_rate], atol=1e-6)


def test_duplicate_point_ids_rejected():
    with pytest.raises(ValueError):
        world_with([(1, [1, 0, 0]), (1, [2, 0, 0])])


def test_simulator_pins_clock():
    sim = Simulator(world_with([]))
    for k in range(1, 2001):
        sim.step(UnicycleInput(0.1, 0.0), UnicycleInput(0.1, 0.0), 0.05, time=k / 20)
    assert sim.world.time == 100.0
