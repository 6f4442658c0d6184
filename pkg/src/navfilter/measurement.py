"""Landmark statistics and body-frame feature observations."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import EmptyLandmarkSet, InsufficientFeatures, ParseError, UnknownLandmarkId
from .lie import NavState

RANK_TOL = 1e-9


@dataclass(frozen=True)
class Landmark:
    id: int
    p: NDArray[np.float64]
    s: float = 1.0

    def __post_init__(self) -> None:
        p = np.array(self.p, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValueError(f"landmark {self.id}: position must be a finite 3-vector")
        if not self.s > 0.0:
            raise ValueError(f"landmark {self.id}: weight must be positive, got {self.s}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "s", float(self.s))


@dataclass(frozen=True)
class LandmarkObservation:
    id: int
    y: NDArray[np.float64]
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=float)
        if y.shape != (3,) or not np.all(np.isfinite(y)):
            raise ValueError(f"observation {self.id}: y must be a finite 3-vector")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class ObservationNoiseSpec:
    """Additive per-landmark bias (keyed by id) and isotropic Gaussian noise."""

    sigma_y: float = 0.0
    bias_y: Mapping[int, NDArray[np.float64]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.sigma_y < 0.0:
            raise ValueError("sigma_y must be non-negative")

    def bias_for(self, landmark_id: int) -> NDArray[np.float64]:
        return np.asarray(self.bias_y.get(landmark_id, np.zeros(3)), dtype=float)


@dataclass(frozen=True)
class MeasurementBundle:
    """Measurement-derived quantities used by one filter correction.

    Attributes
    ----------
    p_c : weighted landmark centroid.
    s_T : sum of weights.
    M : weighted landmark scatter matrix.
    MRtilde : ``M R~`` reconstructed from body-frame observations.
    RtPe : ``R~^T P~_eps``, the weighted mean of ``p_i - R^ y_i - P^``.
    """

    p_c: NDArray[np.float64]
    s_T: float
    M: NDArray[np.float64]
    MRtilde: NDArray[np.float64]
    RtPe: NDArray[np.float64]


def landmark_stats(
    landmarks: Sequence[Landmark],
) -> tuple[NDArray[np.float64], float, NDArray[np.float64]]:
    """Return ``(p_c, s_T, M)`` with ``M = sum s_i p_i p_i^T - s_T p_c p_c^T``."""
    if len(landmarks) == 0:
        raise EmptyLandmarkSet("at least one landmark is required")
    p = np.array([lm.p for lm in landmarks])
    s = np.array([lm.s for lm in landmarks])
    s_t = float(s.sum())
    p_c = (s @ p) / s_t
    m = (p.T * s) @ p - s_t * np.outer(p_c, p_c)
    m = 0.5 * (m + m.T)
    return p_c, s_t, m


def check_noncollinear(landmarks: Sequence[Landmark]) -> bool:
    """True iff there are >= 3 landmarks and ``M`` has rank >= 2."""
    if len(landmarks) < 3:
        return False
    _, _, m = landmark_stats(landmarks)
    eig = np.linalg.eigvalsh(m)
    return bool(eig[1] > RANK_TOL * np.trace(m))


def build_bundle(
    landmarks: Sequence[Landmark] | Mapping[int, Landmark],
    observations: Iterable[LandmarkObservation],
    r_hat: ArrayLike,
    p_hat: ArrayLike,
) -> MeasurementBundle:
    """Assemble the correction statistics from observations and the current estimate.

    Only landmarks that were actually observed enter the statistics. Raises
    :class:`InsufficientFeatures` if those do not satisfy the
    three-non-collinear-features requirement.
    """
    table = _as_table(landmarks)
    observations = list(observations)
    used: list[Landmark] = []
    ys = []
    for obs in observations:
        try:
            used.append(table[obs.id])
        except KeyError:
            raise UnknownLandmarkId(obs.id) from None
        ys.append(obs.y)
    if not check_noncollinear(used):
        raise InsufficientFeatures(f"{len(used)} observed features do not span a plane")

    r_hat = np.asarray(r_hat, dtype=float)
    p_hat = np.asarray(p_hat, dtype=float)
    p_c, s_t, m = landmark_stats(used)
    p = np.array([lm.p for lm in used])
    s = np.array([lm.s for lm in used])
    y = np.array(ys)
    m_r = ((p - p_c).T * s) @ y @ r_hat.T
    y_tilde = p - y @ r_hat.T - p_hat
    rt_pe = (s @ y_tilde) / s_t
    return MeasurementBundle(p_c=p_c, s_T=s_t, M=m, MRtilde=m_r, RtPe=rt_pe)


def synthesize_observation(
    landmark: Landmark,
    x: NavState,
    noise: ObservationNoiseSpec | None = None,
    rng: np.random.Generator | int | None = None,
    timestamp: float = 0.0,
) -> LandmarkObservation:
    """Body-frame observation ``R^T (p - P) + b + n`` of one landmark."""
    y = x.rot.T @ (landmark.p - x.pos)
    if noise is not None:
        y = y + noise.bias_for(landmark.id)
        if noise.sigma_y > 0.0:
            rng = np.random.default_rng(rng)
            y = y + noise.sigma_y * rng.standard_normal(3)
    return LandmarkObservation(landmark.id, y, timestamp)


def observe_all(
    landmarks: Sequence[Landmark],
    x: NavState,
    noise: ObservationNoiseSpec | None = None,
    rng: np.random.Generator | None = None,
    timestamp: float = 0.0,
) -> list[LandmarkObservation]:
    """Observe every landmark from state ``x``, drawing noise from one generator."""
    if noise is not None and noise.sigma_y > 0.0 and rng is None:
        rng = np.random.default_rng()
    return [synthesize_observation(lm, x, noise, rng, timestamp) for lm in landmarks]


def _as_table(landmarks: Sequence[Landmark] | Mapping[int, Landmark]) -> Mapping[int, Landmark]:
    if isinstance(landmarks, Mapping):
        return landmarks
    return {lm.id: lm for lm in landmarks}


def read_landmarks(path: str | Path) -> list[Landmark]:
    """Read a landmark file with one ``id s px py pz`` line per landmark.

    Blank lines and ``#`` comments are skipped.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ParseError(f"expected 5 fields, got {len(parts)}", lineno, str(path))
            try:
                lm = Landmark(int(parts[0]), [float(v) for v in parts[2:]], float(parts[1]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
            out.append(lm)
    return out


def write_landmarks(path: str | Path, landmarks: Iterable[Landmark]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# id s px py pz\n")
        for lm in landmarks:
            fh.write(" ".join([str(lm.id)] + [repr(float(v)) for v in (lm.s, *lm.p)]) + "\n")
