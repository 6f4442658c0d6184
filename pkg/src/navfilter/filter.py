"""Discrete nonlinear navigation filter on SE2(3) with IMU bias compensation.

One filter step propagates the estimate with the bias-corrected IMU sample
and, when a usable landmark bundle is available, corrects it::

    X+ = exp(-W dt) X exp(U_m dt)

with ``U_m = u([w_m - b_w]x, 0, a_m - b_a, 1)`` and
``W = u([w_W]x, w_V, w_a, 1)``. The gravity part of ``W`` (``w_a = -g`` when
every error is zero) equals the gravity matrix ``G`` of the true dynamics, so
the update is split as

    predict:  X- = exp(-G dt) X exp(U_m dt)
    correct:  X+ = exp(-W dt) exp(G dt) X-

which composes to the same matrix. Measurements are evaluated on ``X-``,
the predicted pose at the time the features were observed. Steps without a
usable bundle keep ``X-`` (all correction terms at their zero-error values).

Two equivalent backends are provided: 5x5 matrices (:func:`step`) and unit
quaternions for the attitude (:func:`quat_step`).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .envelope import (
    EnvelopeParams,
    TransformedError,
    envelope_at,
    guard_envelope,
    transform_error,
)
from .errors import InsufficientFeatures, NonMonotoneTime
from .imu import ImuSample
from .lie import (
    NavState,
    TangentElement,
    orthonormalize,
    quat_conj,
    quat_exp,
    quat_mul,
    quat_sandwich,
    quat_to_rot,
    rot_to_quat,
    se23_exp,
    skew,
    so3_jacobians,
    upsilon,
    weighted_rot_distance,
)
from .measurement import Landmark, LandmarkObservation, MeasurementBundle, build_bundle

GRAVITY = np.array([0.0, 0.0, -9.81])
TIME_TOL = 1e-9

log = logging.getLogger("navfilter")


@dataclass(frozen=True)
class FilterGains:
    k_w: float = 3.0
    k_v: float = 4.0
    k_a: float = 4.0
    ell_P: float = 4.0
    gamma_b: float = 2.0
    gamma_a: float = 3.0
    delta: float = 0.15

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"gain {name} must be positive, got {value}")


@dataclass(frozen=True)
class EnvelopeSpec:
    """Envelope settings for the four error channels.

    ``xi0`` and ``delta`` (whole tuples or single channels) may be left as
    ``None``; they are then fixed at the first correction from the initial
    error ``e0`` as
    ``xi0 = delta = [1.3 e0_1, 2|e0_2|, 2|e0_3|, 2|e0_4|] + 2 [0.25, 1, 1, 1]``.
    """

    xi_inf: tuple[float, float, float, float] = (0.03, 0.08, 0.08, 0.08)
    ell: tuple[float, float, float, float] = (1.2, 1.2, 1.2, 1.2)
    xi0: tuple[float | None, ...] | None = None
    delta: tuple[float | None, ...] | None = None

    def resolve(self, e0: ArrayLike) -> tuple[EnvelopeParams, ...]:
        e0 = np.abs(np.asarray(e0, dtype=float))
        auto = np.array([1.3, 2.0, 2.0, 2.0]) * e0 + 2.0 * np.array([0.25, 1.0, 1.0, 1.0])
        xi0 = _fill(self.xi0, auto)
        delta = _fill(self.delta, auto)
        return tuple(
            EnvelopeParams(
                xi0=float(xi0[i]),
                xi_inf=float(self.xi_inf[i]),
                ell=float(self.ell[i]),
                delta_lo=float(delta[i]),
                delta_hi=float(delta[i]),
            )
            for i in range(4)
        )


def _fill(values, auto: NDArray[np.float64]) -> NDArray[np.float64]:
    if values is None:
        return auto
    return np.array([a if v is None else float(v) for v, a in zip(values, auto)])


@dataclass(frozen=True)
class FilterConfig:
    """Everything a filter step needs besides the state and the inputs.

    ``correction_dt`` selects the time step used in a correction: ``"elapsed"``
    (time since the previous correction, which equals the IMU period when
    every step carries a bundle) or ``"step"`` (always the IMU period).
    """

    landmarks: Mapping[int, Landmark] = field(default_factory=dict)
    gains: FilterGains = field(default_factory=FilterGains)
    envelopes: EnvelopeSpec = field(default_factory=EnvelopeSpec)
    gravity: NDArray[np.float64] = field(default_factory=lambda: GRAVITY.copy())
    epsilon: tuple[float, float, float, float] | None = None
    correction_dt: str = "elapsed"

    def __post_init__(self) -> None:
        if not isinstance(self.landmarks, Mapping):
            object.__setattr__(self, "landmarks", {lm.id: lm for lm in self.landmarks})
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float))
        if self.correction_dt not in ("elapsed", "step"):
            raise ValueError("correction_dt must be 'elapsed' or 'step'")


@dataclass(frozen=True)
class FilterState:
    X_hat: NavState = field(default_factory=NavState)
    b_omega_hat: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    b_a_hat: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0
    k: int = 0
    t_start: float | None = None
    t_last_correction: float | None = None
    envelopes: tuple[EnvelopeParams, ...] | None = None


@dataclass(frozen=True)
class QuatFilterState:
    Q_hat: NDArray[np.float64] = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    P_hat: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    V_hat: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    b_omega_hat: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    b_a_hat: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0
    k: int = 0
    t_start: float | None = None
    t_last_correction: float | None = None
    envelopes: tuple[EnvelopeParams, ...] | None = None

    @property
    def rot(self) -> NDArray[np.float64]:
        return quat_to_rot(self.Q_hat)


@dataclass(frozen=True)
class CorrectionTerms:
    w_omega: NDArray[np.float64]
    w_v: NDArray[np.float64]
    w_a: NDArray[np.float64]


DIAGNOSTIC_COLUMNS = (
    ["t"]
    + [f"e{i}" for i in range(1, 5)]
    + [f"xi{i}" for i in range(1, 5)]
    + ["E_R", "E_P1", "E_P2", "E_P3", "norm_w_omega", "norm_w_v", "norm_w_a"]
    + ["b_omega_x", "b_omega_y", "b_omega_z", "b_a_x", "b_a_y", "b_a_z"]
    + [f"guard{i}" for i in range(1, 5)]
)


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step record. Correction fields are NaN on prediction-only steps."""

    t: float
    corrected: bool
    e: NDArray[np.float64]
    xi: NDArray[np.float64]
    E: NDArray[np.float64]
    Delta: NDArray[np.float64]
    w_omega: NDArray[np.float64]
    w_v: NDArray[np.float64]
    w_a: NDArray[np.float64]
    b_omega_hat: NDArray[np.float64]
    b_a_hat: NDArray[np.float64]
    guard: tuple[bool, bool, bool, bool]

    def row(self) -> list[float]:
        return [
            self.t,
            *self.e,
            *self.xi,
            *self.E,
            float(np.linalg.norm(self.w_omega)),
            float(np.linalg.norm(self.w_v)),
            float(np.linalg.norm(self.w_a)),
            *self.b_omega_hat,
            *self.b_a_hat,
            *(int(g) for g in self.guard),
        ]


# --- shared pieces -------------------------------------------------------------


def error_vector(bundle: MeasurementBundle) -> NDArray[np.float64]:
    """``[||M R~||_I, R~^T P~_eps]`` from a bundle."""
    return np.concatenate(([weighted_rot_distance(bundle.M, bundle.MRtilde)], bundle.RtPe))


def shape_errors(
    e: NDArray[np.float64],
    params: Sequence[EnvelopeParams],
    elapsed: float,
    epsilon: Sequence[float] | None = None,
) -> tuple[TransformedError, NDArray[np.float64], tuple[bool, ...]]:
    """Evaluate the envelopes at ``elapsed``, apply the guard, transform each channel.

    Returns the transformed error, the (possibly inflated) envelopes and
    which channels the guard touched.
    """
    xi = np.empty(4)
    E = np.empty(4)
    D = np.empty(4)
    guard = []
    for i, p in enumerate(params):
        xi_i = envelope_at(p, elapsed).xi
        eps = p.epsilon if epsilon is None else epsilon[i]
        guarded = guard_envelope(e[i], xi_i, eps, bound=min(1.0, p.delta_lo, p.delta_hi))
        guard.append(guarded != xi_i)
        xi[i] = guarded
        E[i], D[i] = transform_error(float(e[i]), guarded, p)
    transformed = TransformedError(float(E[0]), E[1:].copy(), float(D[0]), np.diag(D[1:]))
    return transformed, xi, tuple(guard)


def compute_corrections(
    upsilon_mr: NDArray[np.float64],
    p_c: NDArray[np.float64],
    rt_pe: NDArray[np.float64],
    tr: TransformedError,
    gains: FilterGains,
    gravity: NDArray[np.float64],
) -> CorrectionTerms:
    w_omega = -gains.k_w * (tr.E_R * tr.Delta_R + 1.0) * upsilon_mr
    w_v = skew(p_c - rt_pe) @ w_omega - gains.ell_P * rt_pe - gains.k_v * tr.Delta_P @ tr.E_P
    w_a = -gravity + gains.k_a * (gains.delta * skew(w_omega) - tr.Delta_P) @ tr.E_P
    return CorrectionTerms(w_omega, w_v, w_a)


def correction_matrix(terms: CorrectionTerms) -> TangentElement:
    """``W = u([w_W]x, w_V, w_a, 1)``."""
    return TangentElement(terms.w_omega, terms.w_v, terms.w_a, 1.0)


def gravity_matrix(gravity: ArrayLike) -> TangentElement:
    """``G = u(0, 0, -g, 1)``."""
    return TangentElement(np.zeros(3), np.zeros(3), -np.asarray(gravity, dtype=float), 1.0)


def input_matrix(imu: ImuSample, b_omega_hat: ArrayLike, b_a_hat: ArrayLike) -> TangentElement:
    return TangentElement(imu.omega_m - b_omega_hat, np.zeros(3), imu.a_m - b_a_hat, 1.0)


def _check_time(t_state: float, imu: ImuSample, dt: float) -> None:
    if not dt > 0.0:
        raise NonMonotoneTime(f"dt must be positive, got {dt}")
    if imu.t < t_state - TIME_TOL:
        raise NonMonotoneTime(f"IMU sample at t={imu.t} precedes filter time {t_state}")


def _bundle_or_none(
    observations: Sequence[LandmarkObservation] | None,
    landmarks: Mapping[int, Landmark],
    rot: NDArray[np.float64],
    pos: NDArray[np.float64],
) -> MeasurementBundle | None:
    if not observations:
        return None
    try:
        return build_bundle(landmarks, observations, rot, pos)
    except InsufficientFeatures:
        return None


def _correction_dt(config: FilterConfig, t_last: float | None, t_start: float, t_now: float, dt: float) -> float:
    if config.correction_dt == "step":
        return dt
    ref = t_start if t_last is None else t_last
    return max(t_now - ref, dt)


def _prediction_only(t: float, b_omega: NDArray, b_a: NDArray, gravity: NDArray) -> StepDiagnostics:
    nan4 = np.full(4, np.nan)
    return StepDiagnostics(
        t=t,
        corrected=False,
        e=nan4,
        xi=nan4,
        E=nan4,
        Delta=nan4,
        w_omega=np.zeros(3),
        w_v=np.zeros(3),
        w_a=-gravity,
        b_omega_hat=b_omega.copy(),
        b_a_hat=b_a.copy(),
        guard=(False, False, False, False),
    )


def _resolve_envelopes(state, config: FilterConfig, e: NDArray[np.float64], dt_c: float) -> tuple[EnvelopeParams, ...]:
    """Envelopes fixed at the first correction; warns when the steady-state position gain is too stiff for ``dt_c``.

    Near zero error the position channel acts like a gain of about
    ``ell_P + k_v / (xi_inf delta)^2``; a correction held over ``dt_c`` is
    unstable once that gain times ``dt_c`` exceeds 2.
    """
    if state.envelopes is not None:
        return state.envelopes
    envelopes = config.envelopes.resolve(e)
    g = config.gains
    stiff = max((g.ell_P + g.k_v / (p.xi_inf * p.delta_hi) ** 2) * dt_c for p in envelopes[1:])
    if stiff > 2.0:
        log.warning(
            "steady-state position gain x correction interval = %.3g > 2; the discrete loop may be unstable "
            "(raise the position-channel delta or correct more often)",
            stiff,
        )
    return envelopes


# --- matrix backend --------------------------------------------------------------


def predict(state: FilterState, imu: ImuSample, dt: float, gravity: ArrayLike = GRAVITY) -> FilterState:
    """Propagate ``X <- exp(-G dt) X exp(U_m dt)``; biases are unchanged.

    With ``gravity = 0`` this is the bare right-multiplication by the
    exponential of the bias-corrected input.
    """
    u = input_matrix(imu, state.b_omega_hat, state.b_a_hat)
    x = state.X_hat.as_matrix() @ se23_exp(u, dt)
    x = se23_exp(-gravity_matrix(gravity), dt) @ x
    return replace(state, X_hat=_renormalized(x), t=state.t + dt)


def correct(
    state: FilterState,
    bundle: MeasurementBundle,
    transformed: TransformedError,
    gains: FilterGains,
    gravity: ArrayLike,
    dt: float,
) -> FilterState:
    """Apply one correction to a predicted state.

    Bias estimates are updated with the predicted attitude, then
    ``X <- exp(-W dt) exp(G dt) X``.
    """
    gravity = np.asarray(gravity, dtype=float)
    terms = compute_corrections(upsilon(bundle.MRtilde), bundle.p_c, bundle.RtPe, transformed, gains, gravity)
    return _apply_correction(state, bundle, transformed, terms, gains, gravity, dt)


def _apply_correction(state, bundle, tr, terms, gains, gravity, dt) -> FilterState:
    rt = state.X_hat.rot.T
    ups = upsilon(bundle.MRtilde)
    b_omega = state.b_omega_hat - dt * gains.gamma_b * (tr.Delta_R * tr.E_R + 1.0) * (rt @ ups)
    b_a = state.b_a_hat - dt * gains.gamma_a * gains.delta * (rt @ tr.E_P)
    x = se23_exp(gravity_matrix(gravity), dt) @ state.X_hat.as_matrix()
    x = se23_exp(-correction_matrix(terms), dt) @ x
    return replace(state, X_hat=_renormalized(x), b_omega_hat=b_omega, b_a_hat=b_a)


def _renormalized(x: NDArray[np.float64]) -> NavState:
    return NavState(orthonormalize(x[:3, :3]), x[:3, 3], x[:3, 4])


def step(
    state: FilterState,
    imu: ImuSample,
    dt: float,
    observations: Sequence[LandmarkObservation] | None,
    config: FilterConfig,
) -> tuple[FilterState, StepDiagnostics]:
    """One filter iteration from ``imu.t`` to ``imu.t + dt``.

    ``observations`` are body-frame features measured at ``imu.t + dt``. The
    correction is skipped (prediction only) when they are missing or fewer
    than three non-collinear landmarks are visible.
    """
    _check_time(state.t, imu, dt)
    t_start = imu.t if state.t_start is None else state.t_start
    state = replace(state, t=imu.t, t_start=t_start)
    pred = predict(state, imu, dt, config.gravity)
    pred = replace(pred, k=state.k + 1)

    bundle = _bundle_or_none(observations, config.landmarks, pred.X_hat.rot, pred.X_hat.pos)
    if bundle is None:
        return pred, _prediction_only(pred.t, pred.b_omega_hat, pred.b_a_hat, config.gravity)

    e = error_vector(bundle)
    dt_c = _correction_dt(config, state.t_last_correction, t_start, pred.t, dt)
    envelopes = _resolve_envelopes(state, config, e, dt_c)
    tr, xi, guard = shape_errors(e, envelopes, imu.t - t_start, config.epsilon)
    terms = compute_corrections(upsilon(bundle.MRtilde), bundle.p_c, bundle.RtPe, tr, config.gains, config.gravity)
    new = _apply_correction(pred, bundle, tr, terms, config.gains, config.gravity, dt_c)
    new = replace(new, envelopes=envelopes, t_last_correction=pred.t)
    diag = StepDiagnostics(
        t=new.t,
        corrected=True,
        e=e,
        xi=xi,
        E=np.concatenate(([tr.E_R], tr.E_P)),
        Delta=np.concatenate(([tr.Delta_R], np.diag(tr.Delta_P))),
        w_omega=terms.w_omega,
        w_v=terms.w_v,
        w_a=terms.w_a,
        b_omega_hat=new.b_omega_hat.copy(),
        b_a_hat=new.b_a_hat.copy(),
        guard=guard,
    )
    return new, diag


# --- quaternion backend ------------------------------------------------------------


def quat_predict(state: QuatFilterState, imu: ImuSample, dt: float, gravity: ArrayLike = GRAVITY) -> QuatFilterState:
    """Quaternion counterpart of :func:`predict`.

    Attitude: ``Q <- Q . exp(0.5 psi(w_m - b_w) dt)``, the exact flow of
    ``dQ/dt = 0.5 Gamma(w_m - b_w) Q``.
    """
    g = np.asarray(gravity, dtype=float)
    omega = imu.omega_m - state.b_omega_hat
    accel = imu.a_m - state.b_a_hat
    _, j1, j2 = so3_jacobians(omega * dt)
    # rotate the integrated body-frame input with the pre-step attitude
    dv = quat_sandwich(state.Q_hat, j1 @ accel) * dt
    dp = quat_sandwich(state.Q_hat, j2 @ accel) * dt * dt
    p = state.P_hat + state.V_hat * dt + dp + 0.5 * g * dt * dt
    v = state.V_hat + dv + g * dt
    q = quat_mul(state.Q_hat, quat_exp(omega * dt))
    return replace(state, Q_hat=q, P_hat=p, V_hat=v, t=state.t + dt)


def quat_bundle(
    landmarks: Mapping[int, Landmark],
    observations: Sequence[LandmarkObservation],
    q_hat: NDArray[np.float64],
    p_hat: NDArray[np.float64],
) -> MeasurementBundle:
    """Measurement statistics with the attitude applied through quaternion products."""
    base = build_bundle(landmarks, observations, quat_to_rot(q_hat), p_hat)
    used = [landmarks[o.id] for o in observations]
    p = np.array([lm.p for lm in used])
    s = np.array([lm.s for lm in used])
    y_rot = np.array([quat_sandwich(q_hat, o.y) for o in observations])
    phi_q = ((p - base.p_c).T * s) @ y_rot
    v_q = (s @ (p - y_rot - p_hat)) / base.s_T
    return MeasurementBundle(p_c=base.p_c, s_T=base.s_T, M=base.M, MRtilde=phi_q, RtPe=v_q)


def quat_correct(
    state: QuatFilterState,
    bundle: MeasurementBundle,
    transformed: TransformedError,
    gains: FilterGains,
    gravity: ArrayLike,
    dt: float,
) -> QuatFilterState:
    gravity = np.asarray(gravity, dtype=float)
    terms = compute_corrections(upsilon(bundle.MRtilde), bundle.p_c, bundle.RtPe, transformed, gains, gravity)
    return _quat_apply_correction(state, bundle, transformed, terms, gains, gravity, dt)


def _quat_apply_correction(state, bundle, tr, terms, gains, gravity, dt) -> QuatFilterState:
    q_inv = quat_conj(state.Q_hat)
    ups = upsilon(bundle.MRtilde)
    b_omega = state.b_omega_hat - dt * gains.gamma_b * (tr.Delta_R * tr.E_R + 1.0) * quat_sandwich(q_inv, ups)
    b_a = state.b_a_hat - dt * gains.gamma_a * gains.delta * quat_sandwich(q_inv, tr.E_P)

    # exp(-W dt) exp(G dt) applied to (Q, P, V)
    phi_w, j1, j2 = so3_jacobians(-terms.w_omega * dt)
    p = phi_w @ (state.P_hat - 0.5 * gravity * dt * dt) - j1 @ terms.w_v * dt + (j2 - j1) @ terms.w_a * dt * dt
    v = phi_w @ (state.V_hat - gravity * dt) - j1 @ terms.w_a * dt
    q = quat_mul(quat_exp(-terms.w_omega * dt), state.Q_hat)
    return replace(state, Q_hat=q, P_hat=p, V_hat=v, b_omega_hat=b_omega, b_a_hat=b_a)


def quat_step(
    state: QuatFilterState,
    imu: ImuSample,
    dt: float,
    observations: Sequence[LandmarkObservation] | None,
    config: FilterConfig,
) -> tuple[QuatFilterState, StepDiagnostics]:
    """Quaternion-attitude twin of :func:`step` with the same contract."""
    _check_time(state.t, imu, dt)
    t_start = imu.t if state.t_start is None else state.t_start
    state = replace(state, t=imu.t, t_start=t_start)
    pred = replace(quat_predict(state, imu, dt, config.gravity), k=state.k + 1)

    bundle = None
    if observations:
        try:
            bundle = quat_bundle(config.landmarks, observations, pred.Q_hat, pred.P_hat)
        except InsufficientFeatures:
            bundle = None
    if bundle is None:
        return pred, _prediction_only(pred.t, pred.b_omega_hat, pred.b_a_hat, config.gravity)

    e = error_vector(bundle)
    dt_c = _correction_dt(config, state.t_last_correction, t_start, pred.t, dt)
    envelopes = _resolve_envelopes(state, config, e, dt_c)
    tr, xi, guard = shape_errors(e, envelopes, imu.t - t_start, config.epsilon)
    terms = compute_corrections(upsilon(bundle.MRtilde), bundle.p_c, bundle.RtPe, tr, config.gains, config.gravity)
    new = _quat_apply_correction(pred, bundle, tr, terms, config.gains, config.gravity, dt_c)
    new = replace(new, envelopes=envelopes, t_last_correction=pred.t)
    diag = StepDiagnostics(
        t=new.t,
        corrected=True,
        e=e,
        xi=xi,
        E=np.concatenate(([tr.E_R], tr.E_P)),
        Delta=np.concatenate(([tr.Delta_R], np.diag(tr.Delta_P))),
        w_omega=terms.w_omega,
        w_v=terms.w_v,
        w_a=terms.w_a,
        b_omega_hat=new.b_omega_hat.copy(),
        b_a_hat=new.b_a_hat.copy(),
        guard=guard,
    )
    return new, diag


def to_quat_state(state: FilterState) -> QuatFilterState:
    return QuatFilterState(
        Q_hat=rot_to_quat(state.X_hat.rot),
        P_hat=state.X_hat.pos.copy(),
        V_hat=state.X_hat.vel.copy(),
        b_omega_hat=state.b_omega_hat.copy(),
        b_a_hat=state.b_a_hat.copy(),
        t=state.t,
        k=state.k,
        t_start=state.t_start,
        t_last_correction=state.t_last_correction,
        envelopes=state.envelopes,
    )


def quat_nav_state(state: QuatFilterState) -> NavState:
    return NavState(quat_to_rot(state.Q_hat), state.P_hat, state.V_hat)
