"""EuRoC-format CSV input/output, virtual landmarks and replay datasets.

Frame convention: the ground-truth frame is taken as the inertial frame,
z up, so gravity is ``(0, 0, -9.81)``. IMU rows are body-frame gyro rates
and specific forces. Timestamps stay integer nanoseconds until they are
converted to seconds relative to the first replayed sample.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.transform import Rotation, Slerp

from .errors import DegenerateTrajectory, NonMonotoneTime, NoTimeOverlap, ParseError
from .filter import GRAVITY
from .imu import ImuSample
from .lie import NavState, orthonormalize, quat_normalize, quat_to_rot, rot_to_quat
from .measurement import Landmark, ObservationNoiseSpec, check_noncollinear, observe_all
from .simulator import Dataset

QUAT_NORM_TOL = 1e-2
IMU_HEADER = "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]"
GT_HEADER = (
    "#timestamp,p_RS_R_x [m],p_RS_R_y [m],p_RS_R_z [m],q_RS_w [],q_RS_x [],q_RS_y [],q_RS_z [],"
    "v_RS_R_x [m s^-1],v_RS_R_y [m s^-1],v_RS_R_z [m s^-1],"
    "b_w_RS_S_x [rad s^-1],b_w_RS_S_y [rad s^-1],b_w_RS_S_z [rad s^-1],"
    "b_a_RS_S_x [m s^-2],b_a_RS_S_y [m s^-2],b_a_RS_S_z [m s^-2]"
)


@dataclass(frozen=True)
class RawImuRecord:
    timestamp: int
    omega: NDArray[np.float64]
    accel: NDArray[np.float64]


@dataclass(frozen=True)
class GroundTruthRecord:
    """One ground-truth row; biases are ``None`` when the file has no bias columns."""

    timestamp: int
    position: NDArray[np.float64]
    orientation: NDArray[np.float64]
    velocity: NDArray[np.float64]
    b_omega: NDArray[np.float64] | None = None
    b_a: NDArray[np.float64] | None = None

    def nav_state(self) -> NavState:
        return NavState(quat_to_rot(self.orientation), self.position, self.velocity)


@dataclass(frozen=True)
class ReplayDataset(Dataset):
    """A :class:`Dataset` built from files, plus the nanosecond time grid."""

    timestamps_ns: NDArray[np.int64] = None  # type: ignore[assignment]


# --- parsing ---------------------------------------------------------------------------


def _rows(path: str | Path, min_cols: int):
    """Yield ``(line_number, fields)`` for data rows, enforcing increasing timestamps."""
    last = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) < min_cols:
                raise ParseError(f"expected at least {min_cols} columns, got {len(row)}", lineno, str(path))
            try:
                ts = int(row[0].strip())
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
            if not np.all(np.isfinite(values)):
                raise ParseError("non-finite value", lineno, str(path))
            if last is not None and ts <= last:
                raise ParseError(f"timestamp {ts} does not increase (previous {last})", lineno, str(path))
            last = ts
            yield lineno, ts, values


def parse_imu_csv(path: str | Path) -> list[RawImuRecord]:
    """Rows ``timestamp[ns], wx, wy, wz [rad/s], ax, ay, az [m/s^2]``."""
    return [
        RawImuRecord(ts, np.array(v[0:3]), np.array(v[3:6])) for _, ts, v in _rows(path, 7)
    ]


def parse_groundtruth_csv(path: str | Path) -> list[GroundTruthRecord]:
    """Rows ``timestamp[ns], p(3), qw, qx, qy, qz, v(3)[, b_w(3), b_a(3)]``.

    Quaternions whose norm is off by more than ``QUAT_NORM_TOL`` are rejected,
    smaller deviations are normalized away.
    """
    out = []
    for lineno, ts, v in _rows(path, 11):
        q = np.array(v[3:7])
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise ParseError(f"quaternion norm {norm:.6g} is not close to 1", lineno, str(path))
        has_bias = len(v) >= 16
        out.append(
            GroundTruthRecord(
                ts,
                np.array(v[0:3]),
                quat_normalize(q),
                np.array(v[7:10]),
                np.array(v[10:13]) if has_bias else None,
                np.array(v[13:16]) if has_bias else None,
            )
        )
    return out


# --- writing -------------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_imu_csv(path: str | Path, timestamps_ns: Sequence[int], samples: Sequence[ImuSample]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(IMU_HEADER + "\n")
        for ts, s in zip(timestamps_ns, samples):
            fh.write(",".join([str(int(ts)), *map(_fmt, s.omega_m), *map(_fmt, s.a_m)]) + "\n")


def write_groundtruth_csv(
    path: str | Path,
    timestamps_ns: Sequence[int],
    states: Sequence[NavState],
    b_omega: NDArray[np.float64] | None = None,
    b_a: NDArray[np.float64] | None = None,
) -> None:
    n = len(states)
    b_omega = np.zeros((n, 3)) if b_omega is None else np.asarray(b_omega)
    b_a = np.zeros((n, 3)) if b_a is None else np.asarray(b_a)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(GT_HEADER + "\n")
        for i, (ts, x) in enumerate(zip(timestamps_ns, states)):
            q = rot_to_quat(x.rot)
            fields = [str(int(ts)), *map(_fmt, x.pos), *map(_fmt, q), *map(_fmt, x.vel)]
            fields += [*map(_fmt, b_omega[i]), *map(_fmt, b_a[i])]
            fh.write(",".join(fields) + "\n")


def export_dataset(dataset: Dataset, directory: str | Path, t0_ns: int = 0) -> tuple[Path, Path]:
    """Write a simulated dataset as ``imu0.csv`` and ``groundtruth.csv``.

    The IMU file holds one row per truth sample; the last row repeats the
    final input so both files share a time grid.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ts = t0_ns + np.round(np.asarray(dataset.t) * 1e9).astype(np.int64)
    imu = list(dataset.imu) + [dataset.imu[-1]]
    imu_path = directory / "imu0.csv"
    gt_path = directory / "groundtruth.csv"
    write_imu_csv(imu_path, ts, imu)
    write_groundtruth_csv(gt_path, ts, dataset.truth, dataset.b_omega, dataset.b_a)
    return imu_path, gt_path


# --- virtual landmarks -------------------------------------------------------------------------


def generate_virtual_landmarks(
    truth: Sequence[NavState], n: int = 20, margin: float = 1.0, seed: int = 0, weight: float = 1.0
) -> list[Landmark]:
    """Uniform landmarks in the trajectory's bounding box inflated by ``margin``.

    Draws are repeated until the set spans a plane.
    """
    if n < 3:
        raise ValueError("at least three landmarks are required")
    if not truth:
        raise DegenerateTrajectory("empty trajectory")
    pos = np.array([x.pos for x in truth])
    lo = pos.min(axis=0) - margin
    hi = pos.max(axis=0) + margin
    extent = hi - lo
    if np.count_nonzero(extent > 1e-9) < 2:
        raise DegenerateTrajectory(f"inflated bounding box {extent} spans fewer than two axes")
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        pts = rng.uniform(lo, hi, size=(n, 3))
        landmarks = [Landmark(i, p, weight) for i, p in enumerate(pts)]
        if check_noncollinear(landmarks):
            return landmarks
    raise DegenerateTrajectory("could not draw non-collinear landmarks")


# --- replay ------------------------------------------------------------------------------------


def interpolate_truth(records: Sequence[GroundTruthRecord], query_ns: NDArray[np.int64]) -> list[NavState]:
    """Linear interpolation of position/velocity and slerp of orientation."""
    t_gt = np.array([r.timestamp for r in records], dtype=np.int64)
    ref = t_gt[0]
    x = (t_gt - ref).astype(float)
    xq = (np.asarray(query_ns, dtype=np.int64) - ref).astype(float)
    pos = np.array([r.position for r in records])
    vel = np.array([r.velocity for r in records])
    p = np.column_stack([np.interp(xq, x, pos[:, i]) for i in range(3)])
    v = np.column_stack([np.interp(xq, x, vel[:, i]) for i in range(3)])
    quats = np.array([r.orientation for r in records])
    # scipy uses scalar-last quaternions
    slerp = Slerp(x, Rotation.from_quat(quats[:, [1, 2, 3, 0]]))
    rots = slerp(xq).as_matrix()
    return [NavState(orthonormalize(r), pi, vi) for r, pi, vi in zip(rots, p, v)]


def _interp_rows(records, attr: str, query_ns: NDArray[np.int64]) -> NDArray[np.float64]:
    if getattr(records[0], attr) is None:
        return np.full((len(query_ns), 3), np.nan)
    t = np.array([r.timestamp for r in records], dtype=np.int64)
    x = (t - t[0]).astype(float)
    xq = (query_ns - t[0]).astype(float)
    vals = np.array([getattr(r, attr) for r in records])
    return np.column_stack([np.interp(xq, x, vals[:, i]) for i in range(3)])


def build_replay(
    imu_path: str | Path,
    gt_path: str | Path,
    n_landmarks: int = 20,
    cam_rate: float = 20.0,
    obs_noise: ObservationNoiseSpec | None = None,
    seed: int = 0,
    margin: float = 1.0,
    landmarks: Sequence[Landmark] | None = None,
    weight: float = 1.0,
) -> ReplayDataset:
    """Pair real IMU samples with truth-synthesized feature bundles.

    IMU samples inside the ground-truth time span are passed through
    unchanged. Camera frames are placed every ``1 / cam_rate`` seconds from
    the first replayed sample, each snapped to the nearest IMU timestamp,
    and observe every landmark from the truth interpolated at that
    timestamp.
    """
    imu_rec = parse_imu_csv(imu_path)
    gt_rec = parse_groundtruth_csv(gt_path)
    if not imu_rec or not gt_rec:
        raise NoTimeOverlap("empty IMU or ground-truth file")
    t_lo, t_hi = gt_rec[0].timestamp, gt_rec[-1].timestamp
    imu_rec = [r for r in imu_rec if t_lo <= r.timestamp <= t_hi]
    if len(imu_rec) < 2:
        raise NoTimeOverlap(f"IMU samples do not overlap ground truth [{t_lo}, {t_hi}] ns")
    if cam_rate <= 0.0:
        raise ValueError("cam_rate must be positive")

    ts = np.array([r.timestamp for r in imu_rec], dtype=np.int64)
    if np.any(np.diff(ts) <= 0):
        raise NonMonotoneTime("IMU timestamps are not increasing")
    truth = interpolate_truth(gt_rec, ts)
    if landmarks is None:
        landmarks = generate_virtual_landmarks(truth, n_landmarks, margin, seed, weight)
    t_sec = (ts - ts[0]).astype(float) * 1e-9

    # camera frames snapped to the IMU grid (index 0 is the initial state, never observed)
    period_ns = int(round(1e9 / cam_rate))
    cam_ns = np.arange(ts[0] + period_ns, ts[-1] + 1, period_ns, dtype=np.int64)
    idx = np.clip(np.searchsorted(ts, cam_ns), 1, len(ts) - 1)
    left = np.maximum(idx - 1, 1)
    nearer_left = np.abs(ts[left] - cam_ns) <= np.abs(ts[idx] - cam_ns)
    cam_idx = sorted(set(np.where(nearer_left, left, idx).tolist()))

    obs_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    observations: list = [None] * (len(ts) - 1)
    for i in cam_idx:
        observations[i - 1] = observe_all(landmarks, truth[i], obs_noise, obs_rng, float(t_sec[i]))

    imu = [ImuSample(float(t_sec[k]), r.omega, r.accel) for k, r in enumerate(imu_rec[:-1])]
    return ReplayDataset(
        t=t_sec,
        imu=imu,
        observations=observations,
        truth=truth,
        landmarks=list(landmarks),
        b_omega=_interp_rows(gt_rec, "b_omega", ts),
        b_a=_interp_rows(gt_rec, "b_a", ts),
        gravity=GRAVITY.copy(),
        timestamps_ns=ts,
    )
