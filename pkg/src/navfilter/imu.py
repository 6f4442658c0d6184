"""IMU samples and the additive bias/noise corruption model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class ImuSample:
    """Gyro rate (rad/s) and specific force (m/s^2) measured at time ``t`` (s)."""

    t: float
    omega_m: NDArray[np.float64]
    a_m: NDArray[np.float64]

    def __post_init__(self) -> None:
        for name in ("omega_m", "a_m"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite 3-vector")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class ImuCorruption:
    b_omega: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    b_a: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    sigma_omega: float = 0.0
    sigma_a: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma_omega < 0.0 or self.sigma_a < 0.0:
            raise ValueError("noise standard deviations must be non-negative")
        object.__setattr__(self, "b_omega", np.array(self.b_omega, dtype=float))
        object.__setattr__(self, "b_a", np.array(self.b_a, dtype=float))


def corrupt_imu(
    t: float,
    omega: ArrayLike,
    accel: ArrayLike,
    corruption: ImuCorruption | None = None,
    rng: np.random.Generator | int | None = None,
) -> ImuSample:
    """Measured sample ``(omega + b_omega + n_omega, a + b_a + n_a)``."""
    omega_m = np.asarray(omega, dtype=float)
    a_m = np.asarray(accel, dtype=float)
    if corruption is not None:
        omega_m = omega_m + corruption.b_omega
        a_m = a_m + corruption.b_a
        if corruption.sigma_omega > 0.0 or corruption.sigma_a > 0.0:
            rng = np.random.default_rng(rng)
            omega_m = omega_m + corruption.sigma_omega * rng.standard_normal(3)
            a_m = a_m + corruption.sigma_a * rng.standard_normal(3)
    return ImuSample(t, omega_m, a_m)
