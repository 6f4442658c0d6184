"""Property checks shared by ``navfilter validate`` and the test suite.

Each check returns a :class:`CheckResult`; none of them raise on failure.
"""

from __future__ import annotations

import tempfile
from collections.abc import Callable
from dataclasses import dataclass
from unittest import mock

import numpy as np

from . import filter as filt
from .euroc import build_replay, export_dataset, generate_virtual_landmarks, parse_imu_csv
from .filter import EnvelopeSpec, FilterConfig, FilterState, to_quat_state
from .imu import ImuCorruption
from .lie import (
    NavState,
    random_rotation,
    se23_exp,
    series_expm,
    so3_exp,
    TangentElement,
    upsilon,
    weighted_rot_distance,
)
from .envelope import EnvelopeParams, inverse_transform, transform_error
from .measurement import Landmark, check_noncollinear, landmark_stats
from .simulator import Dataset, circle_profile, emit_streams, integrate_truth

BIAS_OMEGA = np.full(3, 0.01)
BIAS_A = np.full(3, 0.1)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


# --- scenarios --------------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    dataset: Dataset
    config: FilterConfig
    initial: FilterState


def convergence_scenario(duration: float = 30.0, seed: int = 0) -> Scenario:
    """Closed-loop convergence run: 200 Hz circle with constant IMU biases.

    The estimate starts 60 deg off in attitude and 2 m off in position.
    Every IMU step carries a landmark bundle.
    """
    profile = circle_profile(duration=duration, rate=0.2)
    landmarks = generate_virtual_landmarks(integrate_truth(profile), 20, 1.0, seed)
    dataset = emit_streams(profile, landmarks, ImuCorruption(BIAS_OMEGA, BIAS_A), None, 200.0, 200.0, seed)
    axis = np.ones(3) / np.sqrt(3.0)
    x0 = dataset.truth[0]
    initial = FilterState(NavState(so3_exp(axis * np.pi / 3.0) @ x0.rot, x0.pos + 2.0 * axis, x0.vel))
    envelopes = EnvelopeSpec(xi0=(None, 10.0, 10.0, 10.0), delta=(None, 10.0, 10.0, 10.0))
    return Scenario(dataset, FilterConfig(landmarks, envelopes=envelopes), initial)


def equilibrium_scenario(steps: int = 1000, seed: int = 0) -> Scenario:
    """Perfect initial estimate, no bias, no noise."""
    profile = circle_profile(duration=steps / 200.0, rate=0.2)
    landmarks = generate_virtual_landmarks(integrate_truth(profile), 20, 1.0, seed)
    dataset = emit_streams(profile, landmarks, None, None, 200.0, 200.0, seed)
    return Scenario(dataset, FilterConfig(landmarks), FilterState(dataset.truth[0]))


def run_scenario(scenario: Scenario, backend: str = "matrix", steps: int | None = None):
    """Return ``(states, diagnostics)`` with the initial state first."""
    quat = backend == "quaternion"
    st = to_quat_state(scenario.initial) if quat else scenario.initial
    step_fn = filt.quat_step if quat else filt.step
    ds = scenario.dataset
    n = len(ds) if steps is None else min(steps, len(ds))
    states = [st]
    diags = []
    for k in range(n):
        st, d = step_fn(st, ds.imu[k], float(ds.t[k + 1] - ds.t[k]), ds.observations[k], scenario.config)
        states.append(st)
        diags.append(d)
    return states, diags


# --- individual checks --------------------------------------------------------------------------


def random_weighted_landmarks(rng: np.random.Generator, n_min: int = 3, n_max: int = 10) -> list[Landmark]:
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        lms = [Landmark(i, rng.normal(scale=2.0, size=3), rng.uniform(0.1, 2.0)) for i in range(n)]
        if check_noncollinear(lms):
            return lms


def lemma_slacks(m: np.ndarray, r_tilde: np.ndarray) -> tuple[float, float]:
    """Slack of the lower and upper bounds on ``||Upsilon(M R~)||^2``."""
    m_bar = np.trace(m) * np.eye(3) - m
    lam = np.linalg.eigvalsh(m_bar)
    dist = weighted_rot_distance(m, m @ r_tilde)
    ups2 = float(np.sum(upsilon(m @ r_tilde) ** 2))
    lower = 0.5 * lam[0] * (1.0 + np.trace(r_tilde)) * dist
    upper = 2.0 * lam[-1] * dist
    return ups2 - lower, upper - ups2


def check_lemma_bounds(pairs: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(pairs):
        _, _, m = landmark_stats(random_weighted_landmarks(rng))
        worst = min(worst, *lemma_slacks(m, random_rotation(rng)))
    return CheckResult("lemma_bounds", bool(worst >= -1e-9), f"min slack {worst:.3e} over {pairs} pairs")


def check_exponential(samples: int = 2000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        dt = rng.uniform(1e-3, 0.1)
        omega = rng.normal(size=3)
        omega *= rng.uniform(0.0, 1.0) / (np.linalg.norm(omega) * dt)
        u = TangentElement(omega, rng.normal(size=3), rng.normal(scale=10.0, size=3), 1.0)
        worst = max(worst, float(np.linalg.norm(se23_exp(u, dt) - series_expm(u.as_matrix() * dt))))
    return CheckResult("se23_exp_oracle", worst < 1e-9, f"max Frobenius error {worst:.3e}")


def check_transform_roundtrip(samples: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        delta = rng.uniform(0.5, 5.0)
        xi = rng.uniform(0.05, 3.0)
        p = EnvelopeParams(xi, xi, 1.0, delta, delta)
        e = rng.uniform(-0.999, 0.999) * delta * xi
        E, _ = transform_error(e, xi, p)
        worst = max(worst, abs(inverse_transform(E, xi, p) - e))
    return CheckResult("transform_roundtrip", worst < 1e-12, f"max error {worst:.3e}")


def check_landmark_generation(seeds: int = 100) -> CheckResult:
    truth = integrate_truth(circle_profile(duration=5.0))
    bad = [s for s in range(seeds) if not check_noncollinear(generate_virtual_landmarks(truth, 3, 1.0, s))]
    return CheckResult("landmark_generation", not bad, f"{len(bad)} of {seeds} seeds violate the rank condition")


def check_csv_roundtrip(seed: int = 0) -> CheckResult:
    profile = circle_profile(duration=1.0)
    landmarks = generate_virtual_landmarks(integrate_truth(profile), 5, 1.0, seed)
    ds = emit_streams(profile, landmarks, ImuCorruption(BIAS_OMEGA, BIAS_A, 0.002, 0.02), None, 200.0, 20.0, seed)
    with tempfile.TemporaryDirectory() as tmp:
        imu_path, gt_path = export_dataset(ds, tmp)
        records = parse_imu_csv(imu_path)[:-1]
        same = all(
            np.array_equal(r.omega, s.omega_m) and np.array_equal(r.accel, s.a_m) for r, s in zip(records, ds.imu)
        )
        replay = build_replay(imu_path, gt_path, landmarks=landmarks, cam_rate=20.0)
    pos_err = max(float(np.max(np.abs(a.pos - b.pos))) for a, b in zip(replay.truth, ds.truth))
    ok = same and len(records) == len(ds.imu) and pos_err < 1e-12
    return CheckResult("csv_roundtrip", ok, f"samples identical: {same}, truth position error {pos_err:.3e}")


def check_equilibrium(steps: int = 1000) -> CheckResult:
    scenario = equilibrium_scenario(steps)
    states, _ = run_scenario(scenario)
    x, xh = scenario.dataset.truth[-1], states[-1].X_hat
    err = max(
        float(np.linalg.norm(x.rot - xh.rot)),
        float(np.linalg.norm(x.pos - xh.pos)),
        float(np.linalg.norm(x.vel - xh.vel)),
        float(np.linalg.norm(states[-1].b_omega_hat)),
        float(np.linalg.norm(states[-1].b_a_hat)),
    )
    return CheckResult("equilibrium", err < 1e-8, f"max error after {steps} steps {err:.3e}")


def check_cross_backend(steps: int = 1000) -> CheckResult:
    scenario = convergence_scenario()
    mat, _ = run_scenario(scenario, "matrix", steps)
    quat, _ = run_scenario(scenario, "quaternion", steps)
    d_rot = max(float(np.linalg.norm(a.X_hat.rot - b.rot)) for a, b in zip(mat, quat))
    d_pos = max(float(np.linalg.norm(a.X_hat.pos - b.P_hat)) for a, b in zip(mat, quat))
    ok = d_rot < 1e-6 and d_pos < 1e-6
    return CheckResult("cross_backend", ok, f"attitude {d_rot:.3e}, position {d_pos:.3e} over {steps} steps")


def _flipped_corrections(*args, **kwargs):
    terms = _ORIGINAL_CORRECTIONS(*args, **kwargs)
    return filt.CorrectionTerms(-terms.w_omega, terms.w_v, terms.w_a)


_ORIGINAL_CORRECTIONS = filt.compute_corrections


def check_envelope_containment(duration: float = 10.0, mutation: bool = False) -> CheckResult:
    """No guard activation after the first correction and every ``|e_i| < xi_i``.

    With ``mutation`` the attitude correction ``w_W`` has its sign flipped,
    which must make this check fail.
    """
    scenario = convergence_scenario(duration)
    if mutation:
        with mock.patch.object(filt, "compute_corrections", _flipped_corrections):
            _, diags = run_scenario(scenario)
    else:
        _, diags = run_scenario(scenario)
    corrected = [d for d in diags if d.corrected]
    guards = sum(sum(d.guard) for d in corrected[1:])
    outside = sum(int(np.any(np.abs(d.e) >= d.xi)) for d in corrected)
    name = "envelope_containment" + ("[mutated w_omega]" if mutation else "")
    return CheckResult(name, bool(guards == 0 and outside == 0), f"guard activations {guards}, outside {outside}")


def all_checks(lemma_pairs: int = 1000, seeds: int = 100, mutation: bool = False) -> list[CheckResult]:
    suite: list[Callable[[], CheckResult]] = [
        lambda: check_lemma_bounds(lemma_pairs),
        check_exponential,
        check_transform_roundtrip,
        lambda: check_landmark_generation(seeds),
        check_csv_roundtrip,
        check_equilibrium,
        check_cross_backend,
        lambda: check_envelope_containment(mutation=mutation),
    ]
    return [fn() for fn in suite]


__all__ = [
    "CheckResult",
    "Scenario",
    "all_checks",
    "check_cross_backend",
    "check_csv_roundtrip",
    "check_envelope_containment",
    "check_equilibrium",
    "check_exponential",
    "check_landmark_generation",
    "check_lemma_bounds",
    "check_transform_roundtrip",
    "convergence_scenario",
    "equilibrium_scenario",
    "lemma_slacks",
    "random_weighted_landmarks",
    "run_scenario",
]
