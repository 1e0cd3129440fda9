"""Scalar inner loops of the depth observer.

Every function here is numba-compatible Python. With numba enabled they are
compiled by :func:`depthpose._accel.njit`; with ``DEPTHPOSE_NUMBA=0`` the very
same code runs in the interpreter, which is the reference path.

Argument order for the observer kernels is fixed:
measured feature ``(xm, ym)``, estimate ``(xh, yh, chi)``, input ``(vd, w)``,
feature gain ``H = [[h00, h01], [h01, h11]]`` and the correction gain
``gain = alpha * lambda``.
"""

import numpy as np

from ._accel import njit


@njit
def observer_rhs(xm, ym, xh, yh, chi, vd, w, h00, h01, h11, gain):
    ex = xm - xh
    ey = ym - yh
    om_x = vd * xm
    om_y = vd * ym
    dx = w * (1.0 + xm * xm) + om_x * chi + h00 * ex + h01 * ey
    dy = w * xm * ym + om_y * chi + h01 * ex + h11 * ey
    dchi = vd * chi * chi + xm * w * chi + gain * (om_x * ex + om_y * ey)
    return dx, dy, dchi


@njit
def _clip(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit
def _finish(xm, ym, chi, nx, ny, nchi, chi_min, chi_max):
    # a diverged feature estimate restarts from the measurement; a NaN depth
    # update keeps the previous value so the bounds hold for any input
    if not (np.isfinite(nx) and np.isfinite(ny)):
        nx = xm
        ny = ym
    if nchi != nchi:
        nchi = chi
    return nx, ny, _clip(nchi, chi_min, chi_max)


@njit
def observer_step_euler(xm, ym, xh, yh, chi, vd, w, h00, h01, h11, gain,
                        dt, chi_min, chi_max):
    dx, dy, dchi = observer_rhs(xm, ym, xh, yh, chi, vd, w, h00, h01, h11, gain)
    nx, ny, nchi = _finish(xm, ym, chi, xh + dt * dx, yh + dt * dy, chi + dt * dchi,
                           chi_min, chi_max)
    return nx, ny, nchi, dx, dy, dchi


@njit
def observer_step_rk4(xm, ym, xh, yh, chi, vd, w, h00, h01, h11, gain,
                      dt, chi_min, chi_max):
    # measurement and input held constant across the step
    k1x, k1y, k1c = observer_rhs(xm, ym, xh, yh, chi, vd, w, h00, h01, h11, gain)
    h = 0.5 * dt
    k2x, k2y, k2c = observer_rhs(xm, ym, xh + h * k1x, yh + h * k1y, chi + h * k1c,
                                 vd, w, h00, h01, h11, gain)
    k3x, k3y, k3c = observer_rhs(xm, ym, xh + h * k2x, yh + h * k2y, chi + h * k2c,
                                 vd, w, h00, h01, h11, gain)
    k4x, k4y, k4c = observer_rhs(xm, ym, xh + dt * k3x, yh + dt * k3y, chi + dt * k3c,
                                 vd, w, h00, h01, h11, gain)
    s6 = dt / 6.0
    nx, ny, nchi = _finish(xm, ym, chi,
                           xh + s6 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
                           yh + s6 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
                           chi + s6 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c),
                           chi_min, chi_max)
    return nx, ny, nchi, k1x, k1y, k1c


@njit
def observer_trace(s_meas, u, dt, xh0, yh0, chi0, h00, h01, h11, gain,
                   chi_min, chi_max, use_rk4):
    """Run one observer over a whole measurement sequence.

    ``s_meas`` and ``u`` are ``(N, 2)`` arrays sampled at the step times.
    Returns an ``(N + 1, 3)`` array of ``(xh, yh, chi)``; row 0 is the
    initial state and row ``k + 1`` the state after consuming sample ``k``.
    """
    n = s_meas.shape[0]
    out = np.empty((n + 1, 3))
    xh, yh, chi = xh0, yh0, chi0
    out[0, 0] = xh
    out[0, 1] = yh
    out[0, 2] = chi
    for k in range(n):
        if use_rk4:
            xh, yh, chi, _, _, _ = observer_step_rk4(
                s_meas[k, 0], s_meas[k, 1], xh, yh, chi, u[k, 0], u[k, 1],
                h00, h01, h11, gain, dt, chi_min, chi_max)
        else:
            xh, yh, chi, _, _, _ = observer_step_euler(
                s_meas[k, 0], s_meas[k, 1], xh, yh, chi, u[k, 0], u[k, 1],
                h00, h01, h11, gain, dt, chi_min, chi_max)
        out[k + 1, 0] = xh
        out[k + 1, 1] = yh
        out[k + 1, 2] = chi
    return out


@njit
def straight_line_features(x_bar, y_bar, z_bar, vd, dt, n):
    """Exact normalized features of a static point seen by a camera moving
    straight along its optical axis at ``vd``; ``(n, 2)`` samples plus the
    true inverse depth at each sample."""
    s = np.empty((n, 2))
    chi = np.empty(n)
    for k in range(n):
        z = z_bar - vd * dt * k
        s[k, 0] = x_bar / z
        s[k, 1] = y_bar / z
        chi[k] = 1.0 / z
    return s, chi
