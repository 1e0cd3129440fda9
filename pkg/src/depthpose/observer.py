"""Inverse-depth observer for a feature tracked by a camera on a unicycle.

The camera translates along its optical axis at ``v_d`` and yaws at
``w_theta``. Writing ``chi = 1 / z_bar`` the measured feature obeys

    s_dot   = f_m(s, u) + Omega(s, u)^T chi
    chi_dot = f_u(s, u, chi)

with ``f_m = w (1 + x^2, x y)``, ``Omega = v_d (x, y)`` and
``f_u = v_d chi^2 + x w chi``. The observer copies these dynamics with a
feature-error injection ``H (s - s_hat)`` and a scalar depth correction
``Lambda * Omega Q (s - s_hat)`` with ``Q = alpha I``. The depth estimate
converges whenever ``Omega`` is persistently exciting, i.e. the feature is
off the image centre while the camera moves forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import NonFiniteInput
from .geometry import NormalizedFeature, UnicycleInput

CHI_MIN = 0.01  # 100 m
CHI_MAX = 10.0  # 0.1 m


@dataclass(frozen=True)
class DepthObserverGains:
    H: np.ndarray = field(default_factory=lambda: 2.5 * np.eye(2))
    alpha: float = 1.0
    lam: float = 120.0

    def __post_init__(self):
        H = np.array(self.H, dtype=float)
        if H.ndim == 0:
            H = float(H) * np.eye(2)
        if H.shape != (2, 2):
            raise ValueError(f"H must be 2x2, got shape {H.shape}")
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-12):
            raise ValueError("H must be symmetric")
        if np.linalg.eigvalsh(H).min() <= 0.0:
            raise ValueError("H must be positive definite")
        if not (self.alpha > 0.0 and self.lam > 0.0):
            raise ValueError("alpha and lambda must be positive")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def correction_gain(self) -> float:
        """The product ``alpha * lambda``; only the product enters the observer."""
        return self.alpha * self.lam


@dataclass(frozen=True)
class DepthObserverState:
    s_hat: NormalizedFeature
    chi_hat: float
    gains: DepthObserverGains = field(default_factory=DepthObserverGains)
    chi_min: float = CHI_MIN
    chi_max: float = CHI_MAX

    def __post_init__(self):
        if not 0.0 < self.chi_min < self.chi_max:
            raise ValueError("need 0 < chi_min < chi_max")
        object.__setattr__(self, "s_hat", NormalizedFeature(*map(float, self.s_hat)))
        object.__setattr__(
            self, "chi_hat", min(max(float(self.chi_hat), self.chi_min), self.chi_max))


class ObserverStepOutput(NamedTuple):
    new_state: DepthObserverState
    s_hat_rate: NormalizedFeature
    chi_hat_rate: float


def eval_dynamics(s, u, chi: float):
    """Return ``(f_m, Omega, f_u)`` of the feature dynamics."""
    x, y = s
    v, w = u
    f_m = np.array([w * (1.0 + x * x), w * x * y])
    omega = np.array([v * x, v * y])
    f_u = v * chi * chi + x * w * chi
    return f_m, omega, f_u


def pe_excitation(s, u) -> float:
    """Instantaneous excitation ``|Omega|^2 = (x^2 + y^2) v_d^2``."""
    x, y = s
    return (x * x + y * y) * u[0] * u[0]


def pe_window_integral(values, dt: float, window: float) -> np.ndarray:
    """Sliding integral of instantaneous excitation over ``window`` seconds.

    Entry ``k`` integrates samples ``k .. k + n - 1`` (rectangle rule) where
    ``n = round(window / dt)``; only complete windows are returned.
    """
    vals = np.asarray(values, dtype=float)
    n = max(1, int(round(window / dt)))
    if vals.size < n:
        return np.empty(0)
    c = np.concatenate(([0.0], np.cumsum(vals)))
    return (c[n:] - c[:-n]) * dt


def init_observer(s_meas, prior_depth: float,
                  gains: DepthObserverGains | None = None,
                  chi_min: float = CHI_MIN, chi_max: float = CHI_MAX) -> DepthObserverState:
    """Start an observer at the first measurement with a prior depth guess."""
    if not prior_depth > 0.0:
        raise ValueError(f"prior depth must be positive, got {prior_depth!r}")
    return DepthObserverState(
        NormalizedFeature(*s_meas), 1.0 / prior_depth,
        gains if gains is not None else DepthObserverGains(), chi_min, chi_max)


def observer_step(state: DepthObserverState, s_meas, u, dt: float,
                  method: str = "euler") -> ObserverStepOutput:
    """Advance the observer by ``dt`` using the feature measured at the step start.

    Returned rates are the observer right-hand side evaluated at the
    pre-step state, whatever the integration method.
    """
    xm, ym = s_meas
    vd, w = u
    if not all(math.isfinite(v) for v in (xm, ym, vd, w, dt)):
        raise NonFiniteInput(f"non-finite observer input: s={tuple(s_meas)}, u={tuple(u)}, dt={dt}")
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if method == "euler":
        kern = kernels.observer_step_euler
    elif method == "rk4":
        kern = kernels.observer_step_rk4
    else:
        raise ValueError(f"unknown integration method {method!r}")
    g = state.gains
    H = g.H
    nx, ny, nchi, dx, dy, dchi = kern(
        float(xm), float(ym), state.s_hat[0], state.s_hat[1], state.chi_hat,
        float(vd), float(w), H[0, 0], H[0, 1], H[1, 1], g.correction_gain,
        float(dt), state.chi_min, state.chi_max)
    new = replace(state, s_hat=NormalizedFeature(nx, ny), chi_hat=nchi)
    return ObserverStepOutput(new, NormalizedFeature(dx, dy), dchi)


def depth_estimate(state: DepthObserverState) -> float:
    return 1.0 / state.chi_hat


def run_observer_trace(s_meas, u, dt: float, state: DepthObserverState,
                       method: str = "euler") -> np.ndarray:
    """Batch version of :func:`observer_step` over a measurement sequence.

    ``u`` may be a single input (held constant) or one row per sample.
    Returns the ``(N + 1, 3)`` history of ``(x_hat, y_hat, chi_hat)``.
    """
    s_meas = np.ascontiguousarray(s_meas, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = np.broadcast_to(u, s_meas.shape)
    u = np.ascontiguousarray(u)
    if not (np.isfinite(s_meas).all() and np.isfinite(u).all()):
        raise NonFiniteInput("non-finite sample in observer trace")
    g = state.gains
    return kernels.observer_trace(
        s_meas, u, float(dt), state.s_hat[0], state.s_hat[1], state.chi_hat,
        g.H[0, 0], g.H[0, 1], g.H[1, 1], g.correction_gain,
        state.chi_min, state.chi_max, method == "rk4")
