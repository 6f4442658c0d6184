"""Run orchestration: datasets from a config, the filter loop, metrics and CSV output."""

from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .config import RunConfig
from .errors import ConfigError
from .euroc import build_replay, generate_virtual_landmarks
from .filter import (
    DIAGNOSTIC_COLUMNS,
    FilterConfig,
    FilterState,
    StepDiagnostics,
    quat_nav_state,
    quat_step,
    step,
    to_quat_state,
)
from .imu import ImuCorruption
from .lie import NavState, is_rotation, rot_distance, so3_exp
from .measurement import ObservationNoiseSpec, read_landmarks, write_landmarks
from .simulator import PROFILES, Dataset, emit_streams, integrate_truth

log = logging.getLogger("navfilter")

ERROR_COLUMNS = ("t", "err_R", "err_P", "err_V", "err_b_omega", "err_b_a")


@dataclass
class RunMetrics:
    """Per-step error norms (aligned with ``Dataset.t``) and summaries.

    Norms: ``||R R^T||_I`` (attitude), ``||P - P^||``, ``||V - V^||``,
    ``||b_w - b^_w||``, ``||b_a - b^_a||``. Bias norms are NaN when the
    true bias is unknown.
    """

    t: NDArray[np.float64]
    norms: NDArray[np.float64]
    guard_activations: int = 0
    guard_after_first: int = 0
    envelope_violations: int = 0
    breaches: list[str] = field(default_factory=list)

    NAMES = ERROR_COLUMNS[1:]

    def final_window(self, fraction: float = 0.1) -> NDArray[np.float64]:
        n = max(1, int(round(fraction * len(self.t))))
        return np.nanmean(self.norms[-n:], axis=0) if np.isfinite(self.norms[-n:]).any() else np.full(5, np.nan)

    def peak(self) -> NDArray[np.float64]:
        return np.array([np.nanmax(c) if np.isfinite(c).any() else np.nan for c in self.norms.T])

    def final(self) -> NDArray[np.float64]:
        return self.norms[-1].copy()

    def summary(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for name, fin, win, pk in zip(self.NAMES, self.final(), self.final_window(), self.peak()):
            out[f"{name}_final"] = float(fin)
            out[f"{name}_final_window_mean"] = float(win)
            out[f"{name}_peak"] = float(pk)
        out["guard_activations"] = self.guard_activations
        out["guard_activations_after_first"] = self.guard_after_first
        out["envelope_violations"] = self.envelope_violations
        out["invariant_breaches"] = len(self.breaches)
        return out


@dataclass
class RunResult:
    dataset: Dataset
    estimates: list[NavState]
    b_omega_hat: NDArray[np.float64]
    b_a_hat: NDArray[np.float64]
    diagnostics: list[StepDiagnostics]
    metrics: RunMetrics


# --- setup ----------------------------------------------------------------------------------


def error_norms(
    truth: NavState, est: NavState, b_omega: NDArray, b_a: NDArray, b_omega_hat: NDArray, b_a_hat: NDArray
) -> NDArray[np.float64]:
    return np.array(
        [
            rot_distance(truth.rot @ est.rot.T),
            np.linalg.norm(truth.pos - est.pos),
            np.linalg.norm(truth.vel - est.vel),
            np.linalg.norm(b_omega - b_omega_hat),
            np.linalg.norm(b_a - b_a_hat),
        ]
    )


def initial_estimate(config: RunConfig, x_true: NavState) -> FilterState:
    init = config.init
    rot_err = so3_exp(np.asarray(init.rot_axis_angle, dtype=float))
    if init.source == "truth":
        x = NavState(rot_err @ x_true.rot, x_true.pos + init.pos, x_true.vel + init.vel)
    else:
        x = NavState(rot_err, np.asarray(init.pos, dtype=float), np.asarray(init.vel, dtype=float))
    return FilterState(x, np.array(init.b_omega, dtype=float), np.array(init.b_a, dtype=float))


def filter_config(config: RunConfig, dataset: Dataset) -> FilterConfig:
    return FilterConfig(
        landmarks=dataset.landmarks,
        gains=config.gains,
        envelopes=config.envelopes,
        gravity=np.asarray(config.gravity, dtype=float),
        epsilon=config.epsilon,
        correction_dt=config.correction_dt,
    )


def simulated_dataset(config: RunConfig) -> Dataset:
    sim = config.simulate
    try:
        profile = PROFILES[sim.profile](
            duration=sim.duration, dt=1.0 / sim.imu_rate, gravity=config.gravity, **sim.profile_params
        )
    except TypeError as exc:
        raise ConfigError("simulate.profile_params", str(exc)) from None
    # a constant yaw about the gravity axis maps every profile onto another valid trajectory
    yaw = so3_exp(np.array([0.0, 0.0, sim.start_yaw]))
    p0 = profile.x0
    x0 = NavState(yaw @ p0.rot, yaw @ p0.pos + np.asarray(sim.start_pos), yaw @ p0.vel)
    if sim.landmarks_file:
        landmarks = read_landmarks(config.resolve_path(sim.landmarks_file))
    else:
        truth = integrate_truth(profile, x0, gravity=config.gravity)
        landmarks = generate_virtual_landmarks(truth, sim.n_landmarks, sim.margin, config.seed, sim.landmark_weight)
    corruption = ImuCorruption(np.array(sim.b_omega), np.array(sim.b_a), sim.sigma_omega, sim.sigma_a)
    return emit_streams(
        profile,
        landmarks,
        corruption,
        ObservationNoiseSpec(sim.sigma_y),
        sim.imu_rate,
        sim.cam_rate,
        config.seed,
        x0=x0,
        gravity=config.gravity,
    )


def replay_dataset(config: RunConfig) -> Dataset:
    rep = config.replay
    if rep.imu is None or rep.groundtruth is None:
        raise ConfigError("replay", "both 'imu' and 'groundtruth' paths are required")
    landmarks = read_landmarks(config.resolve_path(rep.landmarks_file)) if rep.landmarks_file else None
    return build_replay(
        config.resolve_path(rep.imu),
        config.resolve_path(rep.groundtruth),
        n_landmarks=rep.n_landmarks,
        cam_rate=rep.cam_rate,
        obs_noise=ObservationNoiseSpec(rep.sigma_y),
        seed=config.seed,
        margin=rep.margin,
        landmarks=landmarks,
        weight=rep.landmark_weight,
    )


# --- the loop ----------------------------------------------------------------------------------


def run_filter(
    dataset: Dataset, fconfig: FilterConfig, state: FilterState, backend: str = "matrix"
) -> RunResult:
    """Drive the filter over a dataset and collect diagnostics and error norms."""
    n = len(dataset)
    quat = backend == "quaternion"
    st = to_quat_state(state) if quat else state
    estimates = [state.X_hat]
    bw = [state.b_omega_hat.copy()]
    ba = [state.b_a_hat.copy()]
    diags: list[StepDiagnostics] = []
    breaches: list[str] = []
    step_fn = quat_step if quat else step
    for k in range(n):
        dt = float(dataset.t[k + 1] - dataset.t[k])
        st, diag = step_fn(st, dataset.imu[k], dt, dataset.observations[k], fconfig)
        x = quat_nav_state(st) if quat else st.X_hat
        estimates.append(x)
        bw.append(st.b_omega_hat.copy())
        ba.append(st.b_a_hat.copy())
        diags.append(diag)
        if not (np.all(np.isfinite(x.as_matrix())) and is_rotation(x.rot)) and len(breaches) < 10:
            breaches.append(f"step {k}: estimate left SE2(3)")
    b_omega_hat = np.array(bw)
    b_a_hat = np.array(ba)
    norms = np.array(
        [
            error_norms(dataset.truth[k], estimates[k], dataset.b_omega[k], dataset.b_a[k], b_omega_hat[k], b_a_hat[k])
            for k in range(n + 1)
        ]
    )
    corrected = [d for d in diags if d.corrected]
    guards = [sum(d.guard) for d in corrected]
    violations = sum(int(np.any(np.abs(d.e) >= d.xi)) for d in corrected)
    if violations:
        breaches.append(f"{violations} corrections with an error outside its envelope")
    metrics = RunMetrics(
        t=np.asarray(dataset.t, dtype=float),
        norms=norms,
        guard_activations=int(sum(guards)),
        guard_after_first=int(sum(guards[1:])),
        envelope_violations=violations,
        breaches=breaches,
    )
    return RunResult(dataset, estimates, b_omega_hat, b_a_hat, diags, metrics)


def run(config: RunConfig, backend: str | None = None) -> RunResult:
    """Build the dataset named by ``config.mode`` and run the filter on it."""
    if config.mode == "replay":
        dataset = replay_dataset(config)
    else:
        dataset = simulated_dataset(config)
    log.info("dataset: %d IMU steps, %d landmarks", len(dataset), len(dataset.landmarks))
    state = initial_estimate(config, dataset.truth[0])
    result = run_filter(dataset, filter_config(config, dataset), state, backend or config.backend)
    for name, value in result.metrics.summary().items():
        log.debug("%s = %s", name, value)
    return result


# --- output --------------------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_rows(path: str | Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_outputs(result: RunResult, out_dir: str | Path) -> dict[str, Path]:
    """Write ``diagnostics.csv``, ``errors.csv`` and ``metrics.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "diagnostics": out / "diagnostics.csv",
        "errors": out / "errors.csv",
        "metrics": out / "metrics.csv",
    }
    write_rows(paths["diagnostics"], DIAGNOSTIC_COLUMNS, (d.row() for d in result.diagnostics))
    m = result.metrics
    write_rows(paths["errors"], ERROR_COLUMNS, ([t, *row] for t, row in zip(m.t, m.norms)))
    write_rows(paths["metrics"], ("metric", "value"), ((k, v) for k, v in m.summary().items()))
    write_landmarks(out / "landmarks.txt", result.dataset.landmarks)
    paths["landmarks"] = out / "landmarks.txt"
    return paths
