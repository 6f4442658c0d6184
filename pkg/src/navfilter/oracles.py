"""Continuous-time error dynamics and a finite-difference oracle for them.

Used by the test suite and ``validate`` only. The estimate follows the
continuous filter ``dX^/dt = X^ U_m - W X^`` with frozen correction terms,
the truth follows ``dX/dt = X U - G X``. Error definitions::

    R~ = R R^T,  P~ = P - R~ P^,  V~ = V - R~ V^,  P~_eps = P~ - (I - R~) p_c

with ``b~_w = b_w - b^_w`` and ``b~_a = b^_a - b_a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .lie import NavState, skew, upsilon, weighted_rot_distance

Vec = NDArray[np.float64]


@dataclass(frozen=True)
class ErrorDynamicsInputs:
    omega: Vec
    accel: Vec
    b_omega: Vec
    b_a: Vec
    b_omega_hat: Vec
    b_a_hat: Vec
    w_omega: Vec
    w_v: Vec
    w_a: Vec
    M: NDArray[np.float64]
    p_c: Vec
    gravity: Vec


def _flat(x: NavState) -> Vec:
    return np.concatenate((x.rot.ravel(), x.pos, x.vel))


def _unflat(z: Vec) -> tuple[NDArray, Vec, Vec]:
    return z[:9].reshape(3, 3), z[9:12], z[12:15]


def _joint_rate(z: Vec, u: ErrorDynamicsInputs) -> Vec:
    r, p, v = _unflat(z[:15])
    rh, ph, vh = _unflat(z[15:])
    wx = skew(u.w_omega)
    om_m = u.omega + u.b_omega
    a_m = u.accel + u.b_a
    true_rate = np.concatenate(((r @ skew(u.omega)).ravel(), v, r @ u.accel + u.gravity))
    est_rate = np.concatenate(
        (
            (rh @ skew(om_m - u.b_omega_hat) - wx @ rh).ravel(),
            vh - wx @ ph - u.w_v,
            rh @ (a_m - u.b_a_hat) - wx @ vh - u.w_a,
        )
    )
    return np.concatenate((true_rate, est_rate))


def _rk4(z: Vec, u: ErrorDynamicsInputs, h: float) -> Vec:
    k1 = _joint_rate(z, u)
    k2 = _joint_rate(z + 0.5 * h * k1, u)
    k3 = _joint_rate(z + 0.5 * h * k2, u)
    k4 = _joint_rate(z + h * k3, u)
    return z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def error_quantities(z: Vec, m: NDArray, p_c: Vec) -> dict[str, NDArray]:
    r, p, v = _unflat(z[:15])
    rh, ph, vh = _unflat(z[15:])
    rt = r @ rh.T
    pt = p - rt @ ph
    vt = v - rt @ vh
    pe = pt - (np.eye(3) - rt) @ p_c
    return {
        "R": rt,
        "P": pt,
        "V": vt,
        "e1": np.array(weighted_rot_distance(m, m @ rt)),
        "RtPe": rt.T @ pe,
        "RtV": rt.T @ vt,
    }


def error_rates(truth: NavState, est: NavState, u: ErrorDynamicsInputs) -> dict[str, NDArray]:
    """Closed-form time derivatives of the error quantities."""
    rt = truth.rot @ est.rot.T
    pt = truth.pos - rt @ est.pos
    vt = truth.vel - rt @ est.vel
    pe = pt - (np.eye(3) - rt) @ u.p_c
    rt_pe = rt.T @ pe
    bw = est.rot @ (u.b_omega - u.b_omega_hat)
    ba = u.b_a_hat - u.b_a
    wx = skew(u.w_omega)
    return {
        "R": -rt @ skew(bw) + rt @ wx,
        "P": vt - rt @ skew(est.pos) @ bw + rt @ u.w_v,
        "V": truth.rot @ ba - rt @ skew(est.vel) @ bw + u.gravity + rt @ u.w_a,
        "e1": np.array(-0.5 * upsilon(u.M @ rt) @ (bw - u.w_omega)),
        "RtPe": rt.T @ vt
        - skew(est.pos - u.p_c + rt_pe) @ bw
        - skew(u.p_c - rt_pe) @ u.w_omega
        + u.w_v,
        "RtV": -skew(rt.T @ truth.vel) @ bw - wx @ (rt.T @ vt) + est.rot @ ba + rt.T @ u.gravity + u.w_a,
    }


def error_dynamics_oracle(
    truth: NavState, est: NavState, u: ErrorDynamicsInputs, dt: float = 1e-5
) -> dict[str, float]:
    """Largest residual between central finite differences and :func:`error_rates`.

    Both trajectories are stepped ``+-dt`` with RK4 so the differences are
    accurate to ``O(dt^2)``.
    """
    z0 = np.concatenate((_flat(truth), _flat(est)))
    fwd = error_quantities(_rk4(z0, u, dt), u.M, u.p_c)
    bwd = error_quantities(_rk4(z0, u, -dt), u.M, u.p_c)
    closed = error_rates(truth, est, u)
    return {k: float(np.max(np.abs((fwd[k] - bwd[k]) / (2 * dt) - closed[k]))) for k in closed}
