from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navfilter.checks import random_weighted_landmarks
from navfilter.errors import EmptyLandmarkSet, InsufficientFeatures, ParseError, UnknownLandmarkId
from navfilter.lie import NavState, random_rotation, so3_exp
from navfilter.measurement import (
    Landmark,
    LandmarkObservation,
    ObservationNoiseSpec,
    build_bundle,
    check_noncollinear,
    landmark_stats,
    observe_all,
    read_landmarks,
    synthesize_observation,
    write_landmarks,
)

UNIT_AXES = [Landmark(i, e) for i, e in enumerate(np.eye(3))]


def test_stats_single_landmark():
    p_c, s_t, m = landmark_stats([Landmark(0, [1.0, -2.0, 3.0])])
    np.testing.assert_array_equal(p_c, [1.0, -2.0, 3.0])
    assert s_t == 1.0
    np.testing.assert_allclose(m, np.zeros((3, 3)), atol=1e-15)


def test_stats_unit_axes():
    p_c, s_t, m = landmark_stats(UNIT_AXES)
    np.testing.assert_allclose(p_c, np.full(3, 1.0 / 3.0))
    assert s_t == 3.0
    np.testing.assert_allclose(m, np.eye(3) - np.ones((3, 3)) / 3.0, atol=1e-15)


def test_stats_empty_raises():
    with pytest.raises(EmptyLandmarkSet):
        landmark_stats([])


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_scatter_equals_centered_sum(seed):
    lms = random_weighted_landmarks(np.random.default_rng(seed))
    p_c, _, m = landmark_stats(lms)
    centered = sum(lm.s * np.outer(lm.p - p_c, lm.p - p_c) for lm in lms)
    np.testing.assert_allclose(m, centered, atol=1e-12)


@pytest.mark.parametrize(
    "points, expected",
    [
        ([[0, 0, 0], [1, 1, 1], [2, 2, 2]], False),
        ([[1, 0, 0], [0, 1, 0], [0, 0, 1]], True),
        ([[1, 0, 0], [0, 1, 0]], False),
        ([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], True),
    ],
)
def test_check_noncollinear(points, expected):
    assert check_noncollinear([Landmark(i, p) for i, p in enumerate(points)]) is expected


def test_collinear_scatter_has_rank_one():
    _, _, m = landmark_stats([Landmark(i, [i, 2 * i, -i]) for i in range(5)])
    assert np.linalg.matrix_rank(m, tol=1e-9) == 1


def test_landmark_validation():
    with pytest.raises(ValueError):
        Landmark(0, [1.0, 2.0, 3.0], s=0.0)
    with pytest.raises(ValueError):
        Landmark(0, [1.0, np.nan, 3.0])
    with pytest.raises(ValueError):
        LandmarkObservation(0, [1.0, 2.0])


# --- observations --------------------------------------------------------------------


def test_synthesize_examples():
    lm = Landmark(0, [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(synthesize_observation(lm, NavState()).y, [1.0, 0.0, 0.0])
    x = NavState(np.eye(3), np.array([1.0, 0.0, 0.0]), np.zeros(3))
    np.testing.assert_array_equal(synthesize_observation(lm, x).y, np.zeros(3))


def test_observation_bias_added():
    lm = Landmark(4, [1.0, 2.0, 3.0])
    noise = ObservationNoiseSpec(bias_y={4: np.array([0.1, 0.0, -0.1])})
    np.testing.assert_allclose(synthesize_observation(lm, NavState(), noise).y, [1.1, 2.0, 2.9])


def test_observation_noise_statistics():
    rng = np.random.default_rng(0)
    x = NavState(so3_exp(np.array([0.2, -0.4, 0.9])), np.array([0.5, 1.0, -0.3]), np.zeros(3))
    lm = Landmark(0, [2.0, -1.0, 1.5])
    noise = ObservationNoiseSpec(sigma_y=0.01)
    n = 100_000
    ys = np.array([synthesize_observation(lm, x, noise, rng).y for _ in range(n)])
    expected = x.rot.T @ (lm.p - x.pos)
    assert np.all(np.abs(ys.mean(axis=0) - expected) < 3 * 0.01 / np.sqrt(n))
    assert np.std(ys, axis=0) == pytest.approx(np.full(3, 0.01), rel=0.02)


# --- bundles ------------------------------------------------------------------------


def _scene(seed: int):
    rng = np.random.default_rng(seed)
    lms = random_weighted_landmarks(rng)
    x = NavState(random_rotation(rng), rng.normal(scale=2.0, size=3), rng.normal(size=3))
    x_hat = NavState(random_rotation(rng), rng.normal(scale=2.0, size=3), rng.normal(size=3))
    return lms, x, x_hat


def test_bundle_perfect_estimate():
    lms, x, _ = _scene(0)
    b = build_bundle(lms, observe_all(lms, x), x.rot, x.pos)
    np.testing.assert_allclose(b.RtPe, np.zeros(3), atol=1e-12)
    np.testing.assert_allclose(b.MRtilde, b.M, atol=1e-12)


def test_bundle_position_offset():
    lms, x, _ = _scene(1)
    d = np.array([0.3, -0.2, 0.7])
    b = build_bundle(lms, observe_all(lms, x), x.rot, x.pos - d)
    np.testing.assert_allclose(b.RtPe, d, atol=1e-12)


def test_bundle_known_attitude_error():
    lms, x, _ = _scene(2)
    r_tilde = so3_exp(np.array([0.0, 0.0, np.pi / 6]))
    r_hat = r_tilde.T @ x.rot
    p_hat = r_tilde.T @ x.pos
    b = build_bundle(lms, observe_all(lms, x), r_hat, p_hat)
    np.testing.assert_allclose(b.MRtilde, b.M @ r_tilde, atol=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_bundle_identities(seed):
    lms, x, x_hat = _scene(seed)
    b = build_bundle(lms, observe_all(lms, x), x_hat.rot, x_hat.pos)
    p_c, s_t, m = landmark_stats(lms)
    rt = x.rot @ x_hat.rot.T
    pt = x.pos - rt @ x_hat.pos
    np.testing.assert_allclose(b.M, m, atol=1e-12)
    assert b.s_T == pytest.approx(s_t)
    np.testing.assert_allclose(b.MRtilde, m @ rt, atol=1e-10)
    np.testing.assert_allclose(b.RtPe, rt.T @ (pt - (np.eye(3) - rt) @ p_c), atol=1e-10)


def test_bundle_uses_only_observed_landmarks():
    lms, x, _ = _scene(3)
    extra = lms + [Landmark(99, [50.0, 50.0, 50.0])]
    b = build_bundle(extra, observe_all(lms, x), x.rot, x.pos)
    np.testing.assert_allclose(b.p_c, landmark_stats(lms)[0])


def test_bundle_rejects_unknown_and_degenerate():
    lms, x, _ = _scene(4)
    obs = observe_all(lms, x)
    with pytest.raises(UnknownLandmarkId):
        build_bundle(lms[1:], obs, x.rot, x.pos)
    with pytest.raises(InsufficientFeatures):
        build_bundle(lms, obs[:2], x.rot, x.pos)


# --- landmark files ---------------------------------------------------------------------


def test_landmark_file_roundtrip(tmp_path):
    lms = random_weighted_landmarks(np.random.default_rng(6))
    path = tmp_path / "landmarks.txt"
    write_landmarks(path, lms)
    back = read_landmarks(path)
    assert [lm.id for lm in back] == [lm.id for lm in lms]
    for a, b in zip(back, lms):
        assert a.s == b.s
        np.testing.assert_array_equal(a.p, b.p)


def test_landmark_file_comments_and_errors(tmp_path):
    path = tmp_path / "lm.txt"
    path.write_text("# header\n\n0 1.0 1 2 3  # trailing\n1 0.5 0 0 1\n", encoding="utf-8")
    lms = read_landmarks(path)
    assert [lm.id for lm in lms] == [0, 1] and lms[1].s == 0.5
    path.write_text("0 1.0 1 2\n", encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        read_landmarks(path)
    assert exc.value.line == 1
