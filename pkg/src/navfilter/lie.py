"""Small-matrix Lie group kernel: SO(3), so(3), SE2(3) and unit quaternions.

Conventions
-----------
- Vectors are ``(3,)`` float arrays, rotations are ``(3, 3)`` arrays.
- Quaternions are ``(4,)`` arrays ``[q0, q1, q2, q3]`` (scalar first), kept
  with ``q0 >= 0`` after every normalization.
- A navigation matrix packs attitude ``R``, position ``P`` and velocity ``V``::

      X = [[R, P, V],
           [0, 1, 0],
           [0, 0, 1]]

- A tangent/input element ``u(W, v, a, kappa)`` is::

      [[W, v, a],
       [0, 0, 0],
       [0, kappa, 0]]

  ``kappa`` sits in row 5, column 4, so exponentiating couples the ``a``
  column into the ``v`` column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

ORTHO_TOL = 1e-9
SMALL_ANGLE = 1e-8

_I3 = np.eye(3)


def skew(x: ArrayLike) -> NDArray[np.float64]:
    """Return the skew-symmetric matrix ``[x]x`` with ``[x]x @ y = x cross y``."""
    x1, x2, x3 = np.asarray(x, dtype=float)
    return np.array(
        [
            [0.0, -x3, x2],
            [x3, 0.0, -x1],
            [-x2, x1, 0.0],
        ]
    )


def vex(m: ArrayLike) -> NDArray[np.float64]:
    """Inverse of :func:`skew`."""
    m = np.asarray(m, dtype=float)
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def antisym_project(m: ArrayLike) -> NDArray[np.float64]:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m - m.T)


def upsilon(m: ArrayLike) -> NDArray[np.float64]:
    """``vex`` of the anti-symmetric part of ``m``."""
    return vex(antisym_project(m))


def rot_distance(r: ArrayLike) -> float:
    """Normalized attitude distance ``Tr(I - R) / 4``, clipped to ``[0, 1]`` against rounding."""
    return min(max(0.25 * float(np.trace(_I3 - np.asarray(r, dtype=float))), 0.0), 1.0)


def weighted_rot_distance(m: ArrayLike, m_r: ArrayLike) -> float:
    """Weighted attitude distance ``Tr(M - M R~) / 4``.

    Parameters
    ----------
    m : (3, 3) array
        Landmark weighting matrix ``M``.
    m_r : (3, 3) array
        The product ``M R~`` (as reconstructed from measurements).
    """
    return 0.25 * float(np.trace(np.asarray(m, dtype=float) - np.asarray(m_r, dtype=float)))


def _rodrigues_coeffs(theta: float) -> tuple[float, float, float, float]:
    """Coefficients of ``I, W, W^2`` in exp(W), J1 = sum W^(n-1)/n! and
    J2 = sum W^(n-2)/n!, returned as (a, b, c, d) with

    exp = I + a W + b W^2
    J1  = I + b W + c W^2
    J2  = I/2 + c W + d W^2
    """
    t2 = theta * theta
    if theta < SMALL_ANGLE:
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0, 1.0 / 24.0 - t2 / 720.0
    if theta < 5e-2:
        # closed forms cancel catastrophically here; truncation error < eps
        t4, t6 = t2 * t2, t2 * t2 * t2
        return (
            1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0,
            0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t6 / 362880.0,
            1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0 - t6 / 3628800.0,
        )
    s, co = np.sin(theta), np.cos(theta)
    return s / theta, (1.0 - co) / t2, (theta - s) / (t2 * theta), (t2 + 2.0 * co - 2.0) / (2.0 * t2 * t2)


def so3_exp(x: ArrayLike) -> NDArray[np.float64]:
    """Rodrigues' formula for ``exp([x]x)``."""
    x = np.asarray(x, dtype=float)
    w = skew(x)
    a, b, _, _ = _rodrigues_coeffs(float(np.linalg.norm(x)))
    return _I3 + a * w + b * (w @ w)


def so3_jacobians(x: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Return ``(exp(W), J1, J2)`` for ``W = [x]x``.

    ``J1 = sum_{n>=1} W^(n-1)/n!`` is the left Jacobian of SO(3) and
    ``J2 = sum_{n>=2} W^(n-2)/n!`` its second-order companion, which carries
    the double integral of the rotated input.
    """
    x = np.asarray(x, dtype=float)
    w = skew(x)
    w2 = w @ w
    a, b, c, d = _rodrigues_coeffs(float(np.linalg.norm(x)))
    return _I3 + a * w + b * w2, _I3 + b * w + c * w2, 0.5 * _I3 + c * w + d * w2


def orthonormalize(r: ArrayLike, tol: float = ORTHO_TOL) -> NDArray[np.float64]:
    """Project ``r`` back onto SO(3) if ``||r r^T - I||_F`` exceeds ``tol``.

    Uses the polar factor via SVD, which is the nearest rotation in Frobenius norm.
    """
    r = np.asarray(r, dtype=float)
    if np.linalg.norm(r @ r.T - _I3) <= tol:
        return r
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0.0:
        u[:, -1] *= -1.0
        out = u @ vt
    return out


def is_rotation(r: ArrayLike, tol: float = ORTHO_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    return (
        r.shape == (3, 3)
        and bool(np.all(np.isfinite(r)))
        and np.linalg.norm(r @ r.T - _I3) <= tol
        and abs(np.linalg.det(r) - 1.0) <= tol
    )


# --- SE2(3) -----------------------------------------------------------------


@dataclass(frozen=True)
class NavState:
    """Attitude, inertial position and inertial velocity of a rigid body."""

    rot: NDArray[np.float64] = field(default_factory=lambda: np.eye(3))
    pos: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    vel: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        for name, shape in (("rot", (3, 3)), ("pos", (3,)), ("vel", (3,))):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def identity(cls) -> NavState:
        return cls()

    @classmethod
    def from_matrix(cls, x: ArrayLike) -> NavState:
        """Read ``R, P, V`` from the top three rows of a 5x5 matrix."""
        x = np.asarray(x, dtype=float)
        return cls(x[:3, :3], x[:3, 3], x[:3, 4])

    def as_matrix(self) -> NDArray[np.float64]:
        x = np.eye(5)
        x[:3, :3] = self.rot
        x[:3, 3] = self.pos
        x[:3, 4] = self.vel
        return x

    def inverse_matrix(self) -> NDArray[np.float64]:
        rt = self.rot.T
        x = np.eye(5)
        x[:3, :3] = rt
        x[:3, 3] = -rt @ self.pos
        x[:3, 4] = -rt @ self.vel
        return x


@dataclass(frozen=True)
class TangentElement:
    """Element ``u([omega]x, v, a, kappa)`` of the 5x5 input submanifold."""

    omega: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    v: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    a: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    kappa: float = 0.0

    def __post_init__(self) -> None:
        for name in ("omega", "v", "a"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (3,):
                raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def omega_skew(self) -> NDArray[np.float64]:
        return skew(self.omega)

    def as_matrix(self) -> NDArray[np.float64]:
        u = np.zeros((5, 5))
        u[:3, :3] = skew(self.omega)
        u[:3, 3] = self.v
        u[:3, 4] = self.a
        u[4, 3] = self.kappa
        return u

    def __neg__(self) -> TangentElement:
        return TangentElement(-self.omega, -self.v, -self.a, -self.kappa)


def se23_exp(u: TangentElement, dt: float) -> NDArray[np.float64]:
    """Closed-form exponential of the 5x5 embedding of ``u * dt``.

    Writing the embedding as ``[[W, B], [0, N]]`` with ``N`` nilpotent,
    ``exp`` has top-right block ``J1 B + J2 B N``, so the position column
    picks up ``J2 a kappa dt^2`` from the ``kappa`` coupling.
    """
    phi, j1, j2 = so3_jacobians(u.omega * dt)
    k = u.kappa * dt
    out = np.eye(5)
    out[:3, :3] = phi
    out[:3, 3] = j1 @ (u.v * dt) + j2 @ (u.a * dt) * k
    out[:3, 4] = j1 @ (u.a * dt)
    out[4, 3] = k
    return out


def series_expm(a: ArrayLike, terms: int = 30) -> NDArray[np.float64]:
    """Scaled-and-squared truncated Taylor series for ``expm(a)``.

    Kept independent of the closed forms above; used as a reference.
    """
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a, ord=1)
    s = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    a = a / (2.0**s)
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for n in range(1, terms + 1):
        term = term @ a / n
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


# --- unit quaternions ---------------------------------------------------------

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: ArrayLike) -> NDArray[np.float64]:
    """Normalize to unit length with the canonical sign ``q0 >= 0``."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize a zero or non-finite quaternion")
    q = q / n
    return -q if q[0] < 0.0 else q


def quat_conj(q: ArrayLike) -> NDArray[np.float64]:
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _quat_product(q1: NDArray[np.float64], q2: NDArray[np.float64]) -> NDArray[np.float64]:
    s1, v1 = q1[0], q1[1:]
    s2, v2 = q2[0], q2[1:]
    return np.concatenate(([s1 * s2 - v1 @ v2], s1 * v2 + s2 * v1 + np.cross(v1, v2)))


def quat_mul(q1: ArrayLike, q2: ArrayLike) -> NDArray[np.float64]:
    """Hamilton product ``q1 . q2``, renormalized."""
    return quat_normalize(_quat_product(np.asarray(q1, dtype=float), np.asarray(q2, dtype=float)))


def quat_to_rot(q: ArrayLike) -> NDArray[np.float64]:
    """``(q0^2 - |q|^2) I + 2 q q^T + 2 q0 [q]x``."""
    q = np.asarray(q, dtype=float)
    q0, v = q[0], q[1:]
    return (q0 * q0 - v @ v) * _I3 + 2.0 * np.outer(v, v) + 2.0 * q0 * skew(v)


def rot_to_quat(r: ArrayLike) -> NDArray[np.float64]:
    """Inverse of :func:`quat_to_rot` (Shepperd's method)."""
    m = np.asarray(r, dtype=float)
    tr = np.trace(m)
    diag = np.diag(m)
    k = int(np.argmax(np.concatenate(([tr], diag))))
    if k == 0:
        t = 1.0 + tr
        q = np.array([t, m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    elif k == 1:
        t = 1.0 + m[0, 0] - m[1, 1] - m[2, 2]
        q = np.array([m[2, 1] - m[1, 2], t, m[0, 1] + m[1, 0], m[0, 2] + m[2, 0]])
    elif k == 2:
        t = 1.0 - m[0, 0] + m[1, 1] - m[2, 2]
        q = np.array([m[0, 2] - m[2, 0], m[0, 1] + m[1, 0], t, m[1, 2] + m[2, 1]])
    else:
        t = 1.0 - m[0, 0] - m[1, 1] + m[2, 2]
        q = np.array([m[1, 0] - m[0, 1], m[0, 2] + m[2, 0], m[1, 2] + m[2, 1], t])
    return quat_normalize(q)


def pure(v: ArrayLike) -> NDArray[np.float64]:
    """Embed a 3-vector as the pure quaternion ``[0, v]``."""
    return np.concatenate(([0.0], np.asarray(v, dtype=float)))


def quat_sandwich(q: ArrayLike, v: ArrayLike) -> NDArray[np.float64]:
    """Vector part of ``q . [0, v] . q^-1``, i.e. ``R(q) v``."""
    q = np.asarray(q, dtype=float)
    return _quat_product(_quat_product(q, pure(v)), quat_conj(q))[1:]


def quat_exp(x: ArrayLike) -> NDArray[np.float64]:
    """Unit quaternion of the rotation ``so3_exp(x)``."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * float(np.linalg.norm(x))
    if half < SMALL_ANGLE:
        sinc = 0.5 * (1.0 - half * half / 6.0)
    else:
        sinc = np.sin(half) / (2.0 * half)
    return quat_normalize(np.concatenate(([np.cos(half)], sinc * x)))


def gamma_matrix(omega: ArrayLike) -> NDArray[np.float64]:
    """``Gamma(w)`` with ``Gamma(w) q = q . [0, w]``."""
    w = np.asarray(omega, dtype=float)
    out = np.zeros((4, 4))
    out[0, 1:] = -w
    out[1:, 0] = w
    out[1:, 1:] = -skew(w)
    return out


def psi_matrix(omega: ArrayLike) -> NDArray[np.float64]:
    """``Psi(w)`` with ``Psi(w) q = [0, w] . q``."""
    w = np.asarray(omega, dtype=float)
    out = np.zeros((4, 4))
    out[0, 1:] = -w
    out[1:, 0] = w
    out[1:, 1:] = skew(w)
    return out


def random_rotation(rng: np.random.Generator) -> NDArray[np.float64]:
    """Uniformly distributed rotation (via a uniform unit quaternion)."""
    return quat_to_rot(quat_normalize(rng.standard_normal(4)))
