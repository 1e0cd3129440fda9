"""EKF for the planar pose of robot B expressed in the body frame of robot A.

State ``xi = (r_x, r_y, theta)``. Process model, with ``u = (v, w)`` per robot:

    xi_dot = ( v_B cos(theta) - v_A + w_A r_y,
               v_B sin(theta) - w_A r_x,
               w_B - w_A )

Every point seen by both robots ties the state to the two cameras' point
estimates. With ``m_A``/``m_B`` the point in each vehicle plane,
``r = m_A - R(theta) m_B``. Two innovation models are available:

* position level: ``m_B - R(theta)^T (m_A - r)``
* velocity level, the time derivative of the same constraint:
  ``S(theta_dot) m_B + m_B_dot - R(theta)^T (m_A_dot - r_dot)``

Innovation Jacobians are derivatives of the *residual* with respect to
``xi``, so the correction is ``xi - K residual`` with ``K = P J^T S^-1``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import MissingRates, NonFiniteInput, SingularInnovation
from .geometry import SE2Pose, wrap_angle

log = logging.getLogger(__name__)


class InnovationModel(str, enum.Enum):
    POSITION = "position_level"
    VELOCITY = "velocity_level"


@dataclass(frozen=True)
class NoiseConfig:
    q_process: np.ndarray = field(default_factory=lambda: np.diag([1e-4, 1e-4, 1e-5]))
    r_meas: np.ndarray = field(default_factory=lambda: 1e-2 * np.eye(2))
    gate_threshold: float | None = 9.21  # None disables gating

    def __post_init__(self):
        q = np.array(self.q_process, dtype=float)
        r = np.array(self.r_meas, dtype=float)
        if q.shape != (3, 3) or r.shape != (2, 2):
            raise ValueError("q_process must be 3x3 and r_meas 2x2")
        for name, m in (("q_process", q), ("r_meas", r)):
            if not np.allclose(m, m.T) or np.linalg.eigvalsh(m).min() < -1e-12:
                raise ValueError(f"{name} must be symmetric PSD")
        if self.gate_threshold is not None and not self.gate_threshold > 0.0:
            raise ValueError("gate_threshold must be positive or None")
        object.__setattr__(self, "q_process", q)
        object.__setattr__(self, "r_meas", r)


class SideEstimate(NamedTuple):
    """One robot's estimate of a point: feature, inverse depth and their rates."""
    s: tuple
    chi: float
    s_rate: Optional[tuple] = None
    chi_rate: Optional[float] = None
    timestamp: float = 0.0


class PointPairObservation(NamedTuple):
    point_id: int
    a: SideEstimate
    b: SideEstimate


class UpdateResult(NamedTuple):
    xi: SE2Pose
    P: np.ndarray
    accepted: bool
    mahalanobis2: float


def _as_xi(xi) -> np.ndarray:
    if isinstance(xi, SE2Pose):
        return xi.as_array()
    return np.asarray(xi, dtype=float)


def _pack(x: np.ndarray):
    # the update also serves reduced-dimension sanity checks
    return SE2Pose.from_array(x) if x.shape[0] == 3 else x


def _rt(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def _drt(theta: float) -> np.ndarray:
    """d/dtheta of R(theta)^T."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[-s, c], [-c, -s]])


def relpose_dynamics(xi, u_a, u_b) -> np.ndarray:
    rx, ry, th = _as_xi(xi)
    va, wa = u_a
    vb, wb = u_b
    return np.array([
        vb * math.cos(th) - va + wa * ry,
        vb * math.sin(th) - wa * rx,
        wb - wa,
    ])


def relpose_jacobian(xi, u_a, u_b) -> np.ndarray:
    _, _, th = _as_xi(xi)
    wa = u_a[1]
    vb = u_b[0]
    return np.array([
        [0.0, wa, -vb * math.sin(th)],
        [-wa, 0.0, vb * math.cos(th)],
        [0.0, 0.0, 0.0],
    ])


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def ekf_predict(xi, P, u_a, u_b, dt: float, q_process=None):
    """Euler step of the relative dynamics and first-order covariance propagation."""
    x = _as_xi(xi)
    P = np.asarray(P, dtype=float)
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not (np.isfinite(x).all() and np.isfinite(P).all()
            and all(math.isfinite(v) for v in (*u_a, *u_b, dt))):
        raise NonFiniteInput("non-finite value passed to ekf_predict")
    Q = np.zeros((3, 3)) if q_process is None else np.asarray(q_process, dtype=float)
    x_new = x + dt * relpose_dynamics(x, u_a, u_b)
    Phi = np.eye(3) + dt * relpose_jacobian(x, u_a, u_b)
    P_new = _symmetrize(Phi @ P @ Phi.T + Q * dt)
    return SE2Pose.from_array(x_new), P_new


def predict_point_in_B(xi, m_a) -> np.ndarray:
    rx, ry, th = _as_xi(xi)
    return _rt(th) @ (np.asarray(m_a, dtype=float) - np.array([rx, ry]))


def planar_point(s, chi: float) -> np.ndarray:
    """Vehicle-plane point from a feature and its inverse depth."""
    return np.array([1.0 / chi, -s[0] / chi])


def planar_rate(s, s_rate, chi: float, chi_rate: float) -> np.ndarray:
    """Time derivative of :func:`planar_point`, using ``z_dot = -chi_dot / chi^2``."""
    z = 1.0 / chi
    z_dot = -chi_rate * z * z
    return np.array([z_dot, -(s_rate[0] * z + s[0] * z_dot)])


def innovation_position(xi, obs: PointPairObservation):
    """Residual of the rigid point constraint and its Jacobian in ``xi``."""
    rx, ry, th = _as_xi(xi)
    m_a = planar_point(obs.a.s, obs.a.chi)
    m_b = planar_point(obs.b.s, obs.b.chi)
    d = m_a - np.array([rx, ry])
    rt = _rt(th)
    residual = m_b - rt @ d
    J = np.empty((2, 3))
    J[:, :2] = rt
    J[:, 2] = -(_drt(th) @ d)
    return residual, J


def innovation_velocity(xi, obs: PointPairObservation, u_a, u_b):
    """Residual of the differentiated point constraint and its Jacobian in ``xi``.

    The predicted side includes the translation rate ``r_dot`` of the process
    model so that the identity closes exactly at the true pose.
    """
    a, b = obs.a, obs.b
    if a.s_rate is None or a.chi_rate is None or b.s_rate is None or b.chi_rate is None:
        raise MissingRates(f"point {obs.point_id}: velocity innovation needs feature and depth rates")
    x = _as_xi(xi)
    th = x[2]
    theta_dot = u_b[1] - u_a[1]
    m_b = planar_point(b.s, b.chi)
    mdot_b = planar_rate(b.s, b.s_rate, b.chi, b.chi_rate)
    mdot_a = planar_rate(a.s, a.s_rate, a.chi, a.chi_rate)
    pi = np.array([-theta_dot * m_b[1], theta_dot * m_b[0]]) + mdot_b
    f = relpose_dynamics(x, u_a, u_b)
    d = mdot_a - f[:2]
    residual = pi - _rt(th) @ d
    F = relpose_jacobian(x, u_a, u_b)
    # d(residual)/d(xi) = R^T dF_r/dxi - [0 0 dR^T/dtheta d]
    J = _rt(th) @ F[:2, :]
    J[:, 2] -= _drt(th) @ d
    return residual, J


def ekf_update(xi, P, residual, H_jac, r_meas, gate_threshold: float | None = None) -> UpdateResult:
    """Joseph-form EKF correction for a residual with Jacobian ``H_jac``.

    A measurement whose squared Mahalanobis distance exceeds
    ``gate_threshold`` is rejected and the state returned unchanged.
    """
    x = _as_xi(xi)
    P = np.asarray(P, dtype=float)
    y = np.atleast_1d(np.asarray(residual, dtype=float))
    J = np.atleast_2d(np.asarray(H_jac, dtype=float))
    R = np.atleast_2d(np.asarray(r_meas, dtype=float))
    S = J @ P @ J.T + R
    if not np.isfinite(S).all() or np.linalg.cond(S) > 1e12:
        raise SingularInnovation(f"innovation covariance is not invertible: {S!r}")
    S_inv = np.linalg.inv(S)
    d2 = float(y @ S_inv @ y)
    if gate_threshold is not None and d2 > gate_threshold:
        log.debug("gated measurement: d2=%.3g > %.3g", d2, gate_threshold)
        return UpdateResult(_pack(x), P, False, d2)
    K = P @ J.T @ S_inv
    x_new = x - K @ y
    # Joseph form; with H = -J and K_std = -K the factor I - K_std H is I - K J
    A = np.eye(P.shape[0]) - K @ J
    P_new = _symmetrize(A @ P @ A.T + K @ R @ K.T)
    return UpdateResult(_pack(x_new), P_new, True, d2)


def default_initial_covariance() -> np.ndarray:
    return np.diag([2.25, 2.25, math.radians(15.0) ** 2])


@dataclass
class RelPoseEKF:
    """Stateful wrapper that runs predict/update cycles and counts gating."""

    xi: SE2Pose
    P: np.ndarray = field(default_factory=default_initial_covariance)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    model: InnovationModel = InnovationModel.POSITION
    accepted: int = 0
    rejected: int = 0

    def predict(self, u_a, u_b, dt: float) -> None:
        self.xi, self.P = ekf_predict(self.xi, self.P, u_a, u_b, dt, self.noise.q_process)

    def update(self, obs: PointPairObservation, u_a=None, u_b=None) -> UpdateResult:
        if self.model is InnovationModel.POSITION:
            res, J = innovation_position(self.xi, obs)
        else:
            if u_a is None or u_b is None:
                raise MissingRates("velocity-level update needs both robots' inputs")
            res, J = innovation_velocity(self.xi, obs, u_a, u_b)
        out = ekf_update(self.xi, self.P, res, J, self.noise.r_meas, self.noise.gate_threshold)
        if out.accepted:
            self.accepted += 1
            self.xi, self.P = out.xi, out.P
        else:
            self.rejected += 1
            log.info("rejected point %s (d2=%.3g)", obs.point_id, out.mahalanobis2)
        return out

    def update_all(self, observations, u_a=None, u_b=None) -> list[UpdateResult]:
        return [self.update(o, u_a, u_b) for o in sorted(observations, key=lambda o: o.point_id)]


def wrap_error(est: SE2Pose, truth: SE2Pose) -> np.ndarray:
    """Component errors ``est - truth`` with the angle wrapped."""
    return np.array([est.x - truth.x, est.y - truth.y, wrap_angle(est.theta - truth.theta)])
