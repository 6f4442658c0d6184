from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from navfilter.checks import lemma_slacks, random_weighted_landmarks
from navfilter.lie import (
    QUAT_IDENTITY,
    NavState,
    TangentElement,
    antisym_project,
    gamma_matrix,
    is_rotation,
    orthonormalize,
    psi_matrix,
    quat_conj,
    quat_exp,
    quat_mul,
    quat_normalize,
    quat_sandwich,
    quat_to_rot,
    random_rotation,
    rot_distance,
    rot_to_quat,
    se23_exp,
    series_expm,
    skew,
    so3_exp,
    upsilon,
    vex,
    weighted_rot_distance,
)
from navfilter.measurement import landmark_stats

finite = st.floats(-50.0, 50.0, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite)
unit_quat = arrays(np.float64, 4, elements=st.floats(-1.0, 1.0)).filter(lambda q: np.linalg.norm(q) > 1e-3)

RZ90 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


def hamilton(p, q):
    """Unnormalized quaternion product, scalar first."""
    p0, pv, q0, qv = p[0], np.asarray(p[1:]), q[0], np.asarray(q[1:])
    return np.concatenate(([p0 * q0 - pv @ qv], p0 * qv + q0 * pv + np.cross(pv, qv)))


def rz(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# --- skew / vex / projections ------------------------------------------------------


def test_skew_examples():
    np.testing.assert_array_equal(skew([0, 0, 0]), np.zeros((3, 3)))
    np.testing.assert_array_equal(skew([1, 2, 3]), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])


@pytest.mark.parametrize("x", [(0.0, 0.0, 0.0), (1.0, 2.0, 3.0), (-4.2, 0.5, 9.0)])
def test_vex_inverts_skew(x):
    np.testing.assert_array_equal(vex(skew(x)), x)


@given(vec3, vec3)
def test_skew_is_cross_product(x, y):
    np.testing.assert_allclose(skew(x) @ y, np.cross(x, y), atol=1e-9)
    assert np.array_equal(skew(x), -skew(x).T)


@given(vec3)
def test_vex_skew_identity(x):
    assert np.array_equal(vex(skew(x)), x)


def test_antisym_project_examples():
    sym = np.array([[1.0, 2.0, 3.0], [2.0, 5.0, 6.0], [3.0, 6.0, 9.0]])
    np.testing.assert_array_equal(antisym_project(sym), np.zeros((3, 3)))
    np.testing.assert_array_equal(antisym_project(skew([1, 2, 3])), skew([1, 2, 3]))
    m = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_array_equal(antisym_project(m), skew([0.0, 0.0, -1.0]))


@given(arrays(np.float64, (3, 3), elements=finite))
def test_antisym_project_idempotent(m):
    pa = antisym_project(m)
    np.testing.assert_array_equal(antisym_project(pa), pa)
    np.testing.assert_array_equal(antisym_project(m + m.T), np.zeros((3, 3)))


def test_upsilon_examples():
    np.testing.assert_array_equal(upsilon(np.eye(3)), np.zeros(3))
    np.testing.assert_array_equal(upsilon(skew([1, 2, 3])), [1, 2, 3])


# --- attitude distances ------------------------------------------------------------------


@pytest.mark.parametrize(
    "r, expected",
    [
        (np.eye(3), 0.0),
        (rz(np.pi), 1.0),
        (rz(np.pi / 2), 0.5),
        (so3_exp(np.array([1.0, -2.0, 0.5]) / np.linalg.norm([1.0, -2.0, 0.5]) * np.pi / 2), 0.5),
    ],
)
def test_rot_distance_examples(r, expected):
    assert rot_distance(r) == pytest.approx(expected, abs=1e-12)


def test_rot_distance_range():
    rng = np.random.default_rng(0)
    values = [rot_distance(random_rotation(rng)) for _ in range(10_000)]
    assert min(values) >= 0.0 and max(values) <= 1.0


def test_weighted_distance_zero_at_identity():
    rng = np.random.default_rng(1)
    _, _, m = landmark_stats(random_weighted_landmarks(rng))
    assert weighted_rot_distance(m, m) == pytest.approx(0.0, abs=1e-12)
    r = random_rotation(rng)
    assert weighted_rot_distance(m, m @ r) == pytest.approx(0.25 * np.trace(m - m @ r), abs=1e-12)


def test_lemma_bounds_hold():
    rng = np.random.default_rng(5)
    for _ in range(200):
        _, _, m = landmark_stats(random_weighted_landmarks(rng))
        lower, upper = lemma_slacks(m, random_rotation(rng))
        assert lower >= -1e-9 and upper >= -1e-9


def test_scatter_eigenvalue_structure():
    rng = np.random.default_rng(9)
    for _ in range(100):
        _, _, m = landmark_stats(random_weighted_landmarks(rng))
        lam = np.linalg.eigvalsh(m)
        m_bar = np.trace(m) * np.eye(3) - m
        expected = np.sort([lam[2] + lam[1], lam[2] + lam[0], lam[1] + lam[0]])
        np.testing.assert_allclose(np.linalg.eigvalsh(m_bar), expected, atol=1e-9)


# --- exponentials --------------------------------------------------------------------------


def test_so3_exp_examples():
    np.testing.assert_array_equal(so3_exp(np.zeros(3)), np.eye(3))
    np.testing.assert_allclose(so3_exp(np.array([0.0, 0.0, np.pi / 2])), RZ90, atol=1e-15)


@given(arrays(np.float64, 3, elements=st.floats(-3.0, 3.0)))
def test_so3_exp_matches_series(x):
    np.testing.assert_allclose(so3_exp(x), series_expm(skew(x)), atol=1e-12)
    assert is_rotation(so3_exp(x))


@pytest.mark.parametrize("scale", [1e-12, 1e-9, 1e-8, 1.1e-8, 1e-6, 1e-3])
def test_so3_exp_small_angles(scale):
    x = scale * np.array([0.3, -0.5, 0.8])
    np.testing.assert_allclose(so3_exp(x), series_expm(skew(x)), atol=1e-15)


def test_se23_exp_zero_is_identity():
    u = TangentElement(np.zeros(3), np.zeros(3), np.zeros(3), 0.0)
    np.testing.assert_array_equal(se23_exp(u, 0.01), np.eye(5))


def test_se23_exp_rotation_only_is_block_diagonal():
    omega = np.array([0.4, -0.2, 0.7])
    out = se23_exp(TangentElement(omega, np.zeros(3), np.zeros(3), 0.0), 0.5)
    expected = np.eye(5)
    expected[:3, :3] = so3_exp(omega * 0.5)
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_se23_exp_imu_input_matches_series():
    u = TangentElement(np.array([0.1, 0.0, 0.0]), np.zeros(3), np.array([0.0, 0.0, 9.81]), 1.0)
    np.testing.assert_allclose(se23_exp(u, 0.005), series_expm(u.as_matrix() * 0.005), atol=1e-14)


def test_tangent_embedding_layout():
    u = TangentElement(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0]), np.array([7.0, 8.0, 9.0]), 0.5)
    m = u.as_matrix()
    np.testing.assert_array_equal(m[:3, :3], skew([1, 2, 3]))
    np.testing.assert_array_equal(m[:3, 3], [4, 5, 6])
    np.testing.assert_array_equal(m[:3, 4], [7, 8, 9])
    assert m[4, 3] == 0.5
    assert np.count_nonzero(m[3:, :]) == 1


@settings(max_examples=200)
@given(vec3, vec3, vec3, st.floats(-2.0, 2.0), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_se23_exp_group_property(omega, v, a, kappa, dt1, dt2):
    omega = omega / 50.0
    u = TangentElement(omega, v, a, kappa)
    lhs = se23_exp(u, dt1) @ se23_exp(u, dt2)
    rhs = se23_exp(u, dt1 + dt2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.abs(rhs).max()))


def test_nav_state_matrix_roundtrip():
    rng = np.random.default_rng(2)
    x = NavState(random_rotation(rng), rng.normal(size=3), rng.normal(size=3))
    m = x.as_matrix()
    np.testing.assert_array_equal(m[3:], [[0, 0, 0, 1, 0], [0, 0, 0, 0, 1]])
    y = NavState.from_matrix(m)
    np.testing.assert_array_equal(y.rot, x.rot)
    np.testing.assert_array_equal(y.pos, x.pos)
    np.testing.assert_array_equal(y.vel, x.vel)


def test_orthonormalize_repairs_drift():
    rng = np.random.default_rng(3)
    r = random_rotation(rng) + 1e-6 * rng.normal(size=(3, 3))
    assert not is_rotation(r)
    assert is_rotation(orthonormalize(r))


# --- quaternions ---------------------------------------------------------------------------


def test_quat_to_rot_examples():
    np.testing.assert_array_equal(quat_to_rot(QUAT_IDENTITY), np.eye(3))
    th = np.pi / 3
    q = np.array([np.cos(th / 2), 0.0, 0.0, np.sin(th / 2)])
    np.testing.assert_allclose(quat_to_rot(q), so3_exp(np.array([0.0, 0.0, th])), atol=1e-15)


def test_quat_to_rot_is_rotation():
    rng = np.random.default_rng(4)
    for _ in range(10_000):
        assert is_rotation(quat_to_rot(quat_normalize(rng.standard_normal(4))))


@given(unit_quat)
def test_quat_inverse_and_identity(q):
    q = quat_normalize(q)
    assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(quat_mul(q, quat_conj(q)), QUAT_IDENTITY, atol=1e-12)
    np.testing.assert_allclose(quat_mul(QUAT_IDENTITY, q), q, atol=1e-15)


@given(unit_quat, unit_quat)
def test_quat_mul_matches_rotation_product(q1, q2):
    q1, q2 = quat_normalize(q1), quat_normalize(q2)
    np.testing.assert_allclose(quat_to_rot(quat_mul(q1, q2)), quat_to_rot(q1) @ quat_to_rot(q2), atol=1e-12)


@given(unit_quat, vec3)
def test_quat_sandwich_matches_matrix(q, v):
    q = quat_normalize(q)
    np.testing.assert_allclose(quat_sandwich(q, v), quat_to_rot(q) @ v, atol=1e-10)


def test_quat_sandwich_examples():
    np.testing.assert_array_equal(quat_sandwich(QUAT_IDENTITY, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])
    q = rot_to_quat(RZ90)
    np.testing.assert_allclose(quat_sandwich(q, [1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-15)


@given(unit_quat)
def test_rot_to_quat_roundtrip(q):
    r = quat_to_rot(quat_normalize(q))
    np.testing.assert_allclose(quat_to_rot(rot_to_quat(r)), r, atol=1e-12)


@given(arrays(np.float64, 3, elements=st.floats(-3.0, 3.0)))
def test_quat_exp_matches_so3_exp(x):
    np.testing.assert_allclose(quat_to_rot(quat_exp(x)), so3_exp(x), atol=1e-12)


@given(vec3, unit_quat)
def test_gamma_psi_are_quaternion_products(w, q):
    q = quat_normalize(q)
    pure_w = np.concatenate(([0.0], w))
    np.testing.assert_allclose(gamma_matrix(w) @ q, hamilton(q, pure_w), atol=1e-10)
    np.testing.assert_allclose(psi_matrix(w) @ q, hamilton(pure_w, q), atol=1e-10)


def test_gamma_at_identity_equals_psi():
    w = np.array([0.3, -0.1, 0.2])
    np.testing.assert_array_equal(0.5 * gamma_matrix(w) @ QUAT_IDENTITY, np.concatenate(([0.0], w)) / 2)
    np.testing.assert_array_equal(gamma_matrix(w) @ QUAT_IDENTITY, psi_matrix(w) @ QUAT_IDENTITY)
