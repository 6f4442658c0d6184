from __future__ import annotations

import numpy as np
import pytest

from navfilter.errors import RateMismatch
from navfilter.filter import GRAVITY
from navfilter.imu import ImuCorruption, corrupt_imu
from navfilter.lie import NavState, is_rotation, skew
from navfilter.measurement import ObservationNoiseSpec
from navfilter.simulator import (
    PROFILES,
    TrajectoryProfile,
    circle_profile,
    default_landmarks,
    emit_streams,
    figure8_profile,
    hover_profile,
    integrate_truth,
    line_profile,
)


def rk4_truth(profile: TrajectoryProfile, h: float, t_end: float, gravity=GRAVITY):
    """Fine-step RK4 on the continuous navigation equations.

    The rotation is integrated as nine free numbers, so the result is
    returned as raw ``(rot, pos, vel)`` arrays.
    """

    def rate(t, z):
        r = z[:9].reshape(3, 3)
        omega, accel = profile.omega_fn(t), profile.accel_fn(t)
        return np.concatenate(((r @ skew(omega)).ravel(), z[12:15], r @ accel + gravity))

    x0 = profile.x0
    z = np.concatenate((x0.rot.ravel(), x0.pos, x0.vel))
    n = int(round(t_end / h))
    for k in range(n):
        t = k * h
        k1 = rate(t, z)
        k2 = rate(t + h / 2, z + h / 2 * k1)
        k3 = rate(t + h / 2, z + h / 2 * k2)
        k4 = rate(t + h, z + h * k3)
        z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return z[:9].reshape(3, 3), z[9:12], z[12:15]


def test_circle_matches_rk4_oracle():
    profile = circle_profile(duration=10.0, dt=0.005)
    x = integrate_truth(profile)[-1]
    rot, pos, vel = rk4_truth(profile, 0.005 / 100, 10.0)
    assert np.linalg.norm(x.pos - pos) < 1e-6
    assert np.linalg.norm(x.vel - vel) < 1e-6
    assert np.abs(x.rot - rot).max() < 1e-9


def test_circle_closes_on_itself():
    profile = circle_profile(duration=2 * np.pi / 0.5, dt=np.pi / 0.5 / 1000)
    truth = integrate_truth(profile)
    np.testing.assert_allclose(truth[-1].pos, truth[0].pos, atol=1e-9)
    np.testing.assert_allclose(truth[-1].rot, truth[0].rot, atol=1e-9)
    radii = [np.linalg.norm(x.pos[:2]) for x in truth]
    np.testing.assert_allclose(radii, 2.0, atol=1e-9)


def test_integration_order():
    profile = figure8_profile(duration=4.0)
    rot, pos, _ = rk4_truth(profile, 1e-4, 4.0)
    errors = []
    for dt in (0.02, 0.01):
        x = integrate_truth(TrajectoryProfile("f8", profile.omega_fn, profile.accel_fn, 4.0, dt, profile.x0))[-1]
        errors.append(np.linalg.norm(x.pos - pos) + np.abs(x.rot - rot).max())
    assert errors[0] / errors[1] >= 3.0


def test_figure8_follows_reference_path():
    profile = figure8_profile(duration=20.0, dt=0.005)
    truth = integrate_truth(profile)
    t = 20.0
    w, a = 0.4, 2.0
    ref = np.array([a * np.sin(w * t), 0.5 * a * np.sin(2 * w * t), 0.3 * a * np.sin(w * t)])
    assert np.linalg.norm(truth[-1].pos - ref) < 1e-3


def test_straight_line_without_gravity():
    v = np.array([0.3, -0.1, 0.2])
    x0 = NavState(np.eye(3), np.array([1.0, 0.0, -1.0]), v)
    zero = np.zeros(3)
    profile = TrajectoryProfile("free", lambda t: zero, lambda t: zero, 5.0, 0.01, x0)
    truth = integrate_truth(profile, gravity=zero)
    np.testing.assert_allclose(truth[-1].pos, x0.pos + v * 5.0, atol=1e-12)


@pytest.mark.parametrize("factory", [hover_profile, line_profile])
def test_hover_and_line_keep_velocity(factory):
    profile = factory(duration=5.0)
    truth = integrate_truth(profile)
    np.testing.assert_allclose(truth[-1].vel, profile.x0.vel, atol=1e-12)
    np.testing.assert_allclose(truth[-1].pos, profile.x0.pos + profile.x0.vel * 5.0, atol=1e-10)


def test_speed_conserved_without_thrust_or_gravity():
    x0 = NavState(np.eye(3), np.zeros(3), np.array([1.0, 2.0, -0.5]))
    profile = TrajectoryProfile(
        "spin", lambda t: np.array([np.sin(t), 0.3, np.cos(2 * t)]), lambda t: np.zeros(3), 10.0, 0.005, x0
    )
    speeds = [np.linalg.norm(x.vel) for x in integrate_truth(profile, gravity=np.zeros(3))]
    np.testing.assert_allclose(speeds, np.linalg.norm(x0.vel), atol=1e-9)


def test_rotation_stays_orthonormal():
    profile = TrajectoryProfile(
        "tumble", lambda t: np.array([1.3, -0.7, 2.1]), lambda t: np.zeros(3), 500.0, 0.005
    )
    truth = integrate_truth(profile, gravity=np.zeros(3))
    assert len(truth) == 100_001
    assert is_rotation(truth[-1].rot)


def test_profile_validation():
    zero = lambda t: np.zeros(3)  # noqa: E731
    with pytest.raises(ValueError):
        TrajectoryProfile("x", zero, zero, 1.0, 0.0)
    with pytest.raises(ValueError):
        TrajectoryProfile("x", zero, zero, 0.001, 0.01)


def test_profile_registry():
    assert set(PROFILES) == {"hover", "line", "circle", "figure8"}


# --- IMU corruption ---------------------------------------------------------------------


def test_corrupt_imu_examples():
    omega, accel = np.array([0.1, -0.2, 0.3]), np.array([0.0, 0.0, 9.81])
    clean = corrupt_imu(0.0, omega, accel)
    np.testing.assert_array_equal(clean.omega_m, omega)
    b = np.array([0.01, -0.02, 0.005])
    biased = corrupt_imu(0.0, omega, accel, ImuCorruption(b_omega=b))
    np.testing.assert_allclose(biased.omega_m - omega, b, rtol=0.0, atol=1e-16)
    np.testing.assert_array_equal(biased.a_m, accel)


def test_corrupt_imu_noise_statistics():
    rng = np.random.default_rng(3)
    corruption = ImuCorruption(sigma_omega=0.01, sigma_a=0.1)
    samples = np.array([corrupt_imu(0.0, np.zeros(3), np.zeros(3), corruption, rng).a_m for _ in range(20_000)])
    assert np.abs(samples.mean(axis=0)).max() < 3 * 0.1 / np.sqrt(20_000)
    np.testing.assert_allclose(samples.std(axis=0), 0.1, rtol=0.03)


def test_corruption_rejects_negative_sigma():
    with pytest.raises(ValueError):
        ImuCorruption(sigma_a=-1.0)


# --- streams ------------------------------------------------------------------------------


def test_emit_streams_rates():
    profile = circle_profile(duration=2.0)
    ds = emit_streams(profile, default_landmarks(), None, None, 200.0, 20.0, 0)
    assert len(ds) == 400 and len(ds.truth) == 401
    bundles = [k for k, o in enumerate(ds.observations) if o is not None]
    assert len(bundles) == 40
    assert np.all(np.diff(bundles) == 10)
    assert all(obs[0].timestamp == pytest.approx(ds.t[k + 1]) for k, obs in enumerate(ds.observations) if obs)


def test_emit_streams_single_rate():
    ds = emit_streams(circle_profile(duration=0.5), default_landmarks(), imu_rate=200.0, cam_rate=200.0)
    assert all(o is not None for o in ds.observations)


@pytest.mark.parametrize("imu_rate, cam_rate", [(200.0, 30.0), (200.0, 400.0), (200.0, 0.0)])
def test_emit_streams_rate_mismatch(imu_rate, cam_rate):
    with pytest.raises(RateMismatch):
        emit_streams(circle_profile(duration=0.5), default_landmarks(), imu_rate=imu_rate, cam_rate=cam_rate)


def test_emit_streams_deterministic():
    args = (
        figure8_profile(duration=1.0),
        default_landmarks(),
        ImuCorruption(np.full(3, 0.01), np.full(3, 0.1), 0.002, 0.02),
        ObservationNoiseSpec(0.01),
        200.0,
        20.0,
        42,
    )
    a, b = emit_streams(*args), emit_streams(*args)
    for sa, sb in zip(a.imu, b.imu):
        assert np.array_equal(sa.omega_m, sb.omega_m) and np.array_equal(sa.a_m, sb.a_m)
    for oa, ob in zip(a.observations, b.observations):
        if oa is not None:
            assert all(np.array_equal(x.y, y.y) for x, y in zip(oa, ob))
    c = emit_streams(*args[:-1], 43)
    assert not np.array_equal(c.imu[0].a_m, a.imu[0].a_m)


def test_imu_samples_are_held_inputs():
    profile = figure8_profile(duration=1.0)
    ds = emit_streams(profile, default_landmarks(), None, None, 200.0, 20.0, 0)
    for k in (0, 57, 199):
        omega, accel = profile.inputs(ds.t[k], 0.005)
        np.testing.assert_array_equal(ds.imu[k].omega_m, omega)
        np.testing.assert_array_equal(ds.imu[k].a_m, accel)
