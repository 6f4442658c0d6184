"""Ground-truth trajectories, corrupted IMU streams and synthetic feature bundles."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .errors import RateMismatch
from .filter import GRAVITY, gravity_matrix
from .imu import ImuCorruption, ImuSample, corrupt_imu
from .lie import NavState, TangentElement, orthonormalize, se23_exp
from .measurement import Landmark, LandmarkObservation, ObservationNoiseSpec, observe_all

VecFn = Callable[[float], NDArray[np.float64]]


@dataclass(frozen=True)
class TrajectoryProfile:
    """Body-frame angular velocity and specific force as functions of time.

    ``accel_fn`` returns the non-gravitational (specific) force, i.e. what a
    perfect accelerometer would read.
    """

    name: str
    omega_fn: VecFn
    accel_fn: VecFn
    duration: float
    dt: float
    x0: NavState = field(default_factory=NavState)

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.duration < self.dt:
            raise ValueError("duration must be at least one step")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def inputs(self, t: float, dt: float | None = None) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Inputs held over ``[t, t + dt]``, sampled at the interval midpoint."""
        tm = t + 0.5 * (self.dt if dt is None else dt)
        return np.asarray(self.omega_fn(tm), dtype=float), np.asarray(self.accel_fn(tm), dtype=float)


@dataclass(frozen=True)
class Dataset:
    """Time-aligned filter inputs and ground truth.

    ``imu[k]`` and ``observations[k]`` drive the step from ``t[k]`` to
    ``t[k + 1]``; the observations are taken at ``t[k + 1]`` (``None`` when
    no camera frame falls on that step). ``truth`` and the true biases are
    sampled at every ``t[k]``.
    """

    t: NDArray[np.float64]
    imu: list[ImuSample]
    observations: list[list[LandmarkObservation] | None]
    truth: list[NavState]
    landmarks: list[Landmark]
    b_omega: NDArray[np.float64]
    b_a: NDArray[np.float64]
    gravity: NDArray[np.float64] = field(default_factory=lambda: GRAVITY.copy())

    def __len__(self) -> int:
        return len(self.imu)


# --- built-in profiles ------------------------------------------------------------


def hover_profile(duration: float = 10.0, dt: float = 0.005, gravity=GRAVITY) -> TrajectoryProfile:
    g = np.asarray(gravity, dtype=float)
    return TrajectoryProfile("hover", lambda t: np.zeros(3), lambda t: -g, duration, dt)


def line_profile(
    duration: float = 10.0, dt: float = 0.005, speed: float = 0.5, gravity=GRAVITY
) -> TrajectoryProfile:
    g = np.asarray(gravity, dtype=float)
    x0 = NavState(np.eye(3), np.zeros(3), np.array([speed, 0.0, 0.0]))
    return TrajectoryProfile("line", lambda t: np.zeros(3), lambda t: -g, duration, dt, x0)


def circle_profile(
    duration: float = 30.0,
    dt: float = 0.005,
    radius: float = 2.0,
    rate: float = 0.5,
    height: float = 1.0,
    gravity=GRAVITY,
) -> TrajectoryProfile:
    """Level flight around a horizontal circle centred on the origin, nose along the velocity."""
    g = np.asarray(gravity, dtype=float)
    speed = rate * radius
    omega = np.array([0.0, 0.0, rate])
    accel = np.array([0.0, speed * rate, 0.0]) - g
    x0 = NavState(np.eye(3), np.array([0.0, -radius, height]), np.array([speed, 0.0, 0.0]))
    return TrajectoryProfile("circle", lambda t: omega, lambda t: accel, duration, dt, x0)


def _zyx(phi: float, theta: float, psi: float) -> NDArray[np.float64]:
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    rz = np.array([[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cf, -sf], [0.0, sf, cf]])
    return rz @ ry @ rx


def figure8_profile(
    duration: float = 30.0,
    dt: float = 0.005,
    size: float = 2.0,
    rate: float = 0.4,
    gravity=GRAVITY,
) -> TrajectoryProfile:
    """Lemniscate-like path ``(A sin wt, A/2 sin 2wt, 0.3 A sin wt)`` with gentle roll/pitch/yaw.

    Inputs are derived analytically from the reference path and attitude,
    so the integrated truth follows the reference closely.
    """
    g = np.asarray(gravity, dtype=float)
    a_amp, w = size, rate

    def angles(t):
        return (
            (0.1 * math.sin(w * t), 0.1 * w * math.cos(w * t)),
            (0.08 * math.sin(2 * w * t), 0.16 * w * math.cos(2 * w * t)),
            (0.5 * math.sin(w * t), 0.5 * w * math.cos(w * t)),
        )

    def omega_fn(t):
        (phi, dphi), (theta, dtheta), (_, dpsi) = angles(t)
        return np.array(
            [
                dphi - dpsi * math.sin(theta),
                dtheta * math.cos(phi) + dpsi * math.sin(phi) * math.cos(theta),
                -dtheta * math.sin(phi) + dpsi * math.cos(phi) * math.cos(theta),
            ]
        )

    def accel_fn(t):
        (phi, _), (theta, _), (psi, _) = angles(t)
        p_dd = np.array(
            [
                -a_amp * w * w * math.sin(w * t),
                -0.5 * a_amp * 4 * w * w * math.sin(2 * w * t),
                -0.3 * a_amp * w * w * math.sin(w * t),
            ]
        )
        return _zyx(phi, theta, psi).T @ (p_dd - g)

    x0 = NavState(
        _zyx(0.0, 0.0, 0.0),
        np.zeros(3),
        np.array([a_amp * w, a_amp * w, 0.3 * a_amp * w]),
    )
    return TrajectoryProfile("figure8", omega_fn, accel_fn, duration, dt, x0)


PROFILES = {
    "hover": hover_profile,
    "line": line_profile,
    "circle": circle_profile,
    "figure8": figure8_profile,
}


# --- integration ---------------------------------------------------------------------


def propagate_truth(x: NavState, omega, accel, dt: float, gravity=GRAVITY) -> NavState:
    """``X <- exp(-G dt) X exp(U dt)`` with ``U = u([omega]x, 0, accel, 1)``.

    Exact for inputs held constant over the step.
    """
    u = TangentElement(omega, np.zeros(3), accel, 1.0)
    m = se23_exp(-gravity_matrix(gravity), dt) @ x.as_matrix() @ se23_exp(u, dt)
    return NavState(orthonormalize(m[:3, :3]), m[:3, 3], m[:3, 4])


def integrate_truth(
    profile: TrajectoryProfile, x0: NavState | None = None, gravity=GRAVITY
) -> list[NavState]:
    """Integrate the navigation dynamics; returns ``n_steps + 1`` states."""
    x = profile.x0 if x0 is None else x0
    states = [x]
    for k in range(profile.n_steps):
        omega, accel = profile.inputs(k * profile.dt)
        x = propagate_truth(x, omega, accel, profile.dt, gravity)
        states.append(x)
    return states


def emit_streams(
    profile: TrajectoryProfile,
    landmarks: Sequence[Landmark],
    corruption: ImuCorruption | None = None,
    obs_noise: ObservationNoiseSpec | None = None,
    imu_rate: float = 200.0,
    cam_rate: float = 20.0,
    seed: int = 0,
    x0: NavState | None = None,
    gravity=GRAVITY,
) -> Dataset:
    """Simulate truth plus IMU and camera streams.

    IMU samples are the (corrupted) inputs the truth integrator held over
    each step. Every ``imu_rate / cam_rate`` steps a bundle observing all
    landmarks from the true pose is attached.
    """
    if not (cam_rate > 0.0 and imu_rate > 0.0):
        raise RateMismatch(f"rates must be positive, got imu_rate {imu_rate}, cam_rate {cam_rate}")
    ratio = imu_rate / cam_rate
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise RateMismatch(f"imu_rate {imu_rate} is not a multiple of cam_rate {cam_rate}")
    ratio = int(round(ratio))
    dt = 1.0 / imu_rate
    profile = replace(profile, dt=dt)
    corruption = corruption or ImuCorruption()
    g = np.asarray(gravity, dtype=float)

    seq = np.random.SeedSequence(seed)
    imu_rng, obs_rng = (np.random.default_rng(s) for s in seq.spawn(2))

    n = profile.n_steps
    x = profile.x0 if x0 is None else x0
    truth = [x]
    imu: list[ImuSample] = []
    observations: list[list[LandmarkObservation] | None] = []
    for k in range(n):
        t = k * dt
        omega, accel = profile.inputs(t)
        imu.append(corrupt_imu(t, omega, accel, corruption, imu_rng))
        x = propagate_truth(x, omega, accel, dt, g)
        truth.append(x)
        if (k + 1) % ratio == 0:
            observations.append(observe_all(landmarks, x, obs_noise, obs_rng, (k + 1) * dt))
        else:
            observations.append(None)

    return Dataset(
        t=np.arange(n + 1) * dt,
        imu=imu,
        observations=observations,
        truth=truth,
        landmarks=list(landmarks),
        b_omega=np.tile(corruption.b_omega, (n + 1, 1)),
        b_a=np.tile(corruption.b_a, (n + 1, 1)),
        gravity=g,
    )


def default_landmarks(
    n: int = 20, center=(0.0, 0.0, 1.0), half_extent: float = 3.0, weight: float = 1.0, seed: int = 7
) -> list[Landmark]:
    """Random landmarks in a cube around ``center`` (non-collinear with probability one)."""
    rng = np.random.default_rng(seed)
    pts = np.asarray(center) + rng.uniform(-half_extent, half_extent, size=(n, 3))
    return [Landmark(i, p, weight) for i, p in enumerate(pts)]
