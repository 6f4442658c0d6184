"""Prescribed-performance envelopes and the logarithmic error transform.

Each error channel ``e_i`` is kept inside ``(-delta_lo * xi, delta_hi * xi)``
where ``xi(t)`` decays exponentially from ``xi0`` to ``xi_inf``. The
transformed error ``E = 0.5 ln((delta_lo + e/xi) / (delta_hi - e/xi))`` is
unbounded as ``e`` approaches either barrier.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import EnvelopeViolation


@dataclass(frozen=True)
class EnvelopeParams:
    xi0: float
    xi_inf: float
    ell: float
    delta_lo: float
    delta_hi: float

    def __post_init__(self) -> None:
        for name in ("xi0", "xi_inf", "ell", "delta_lo", "delta_hi"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.xi0 < self.xi_inf:
            raise ValueError(f"xi0 ({self.xi0}) must not be below xi_inf ({self.xi_inf})")

    @property
    def epsilon(self) -> float:
        """Default guard margin, small relative to the steady-state band."""
        return 1e-3 * self.xi_inf

    def admits(self, e0: float) -> bool:
        """Whether the initial error satisfies ``delta_lo = delta_hi > |e0|`` and ``xi0 > |e0|``."""
        return self.delta_lo == self.delta_hi and self.delta_hi > abs(e0) and self.xi0 > abs(e0)


@dataclass(frozen=True)
class EnvelopeState:
    xi: float
    xi_dot: float

    @property
    def mu(self) -> float:
        return self.xi_dot / self.xi


@dataclass(frozen=True)
class ErrorVector:
    """``e = [||M R~||_I, (R~^T P~_eps)^T]``."""

    e1: float
    e2: float
    e3: float
    e4: float

    @classmethod
    def from_array(cls, e: Sequence[float]) -> ErrorVector:
        return cls(*(float(v) for v in e))

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.e1, self.e2, self.e3, self.e4])


@dataclass(frozen=True)
class TransformedError:
    E_R: float
    E_P: NDArray[np.float64]
    Delta_R: float
    Delta_P: NDArray[np.float64]

    @classmethod
    def zero(cls) -> TransformedError:
        return cls(0.0, np.zeros(3), 0.0, np.zeros((3, 3)))


def envelope_at(params: EnvelopeParams, t: float) -> EnvelopeState:
    if t < 0.0:
        raise ValueError("t must be non-negative")
    decay = (params.xi0 - params.xi_inf) * math.exp(-params.ell * t)
    return EnvelopeState(decay + params.xi_inf, -params.ell * decay)


def transform_error(e: float, xi: float, params: EnvelopeParams) -> tuple[float, float]:
    """Return ``(E, Delta)`` for error ``e`` inside envelope ``xi``.

    ``Delta = (1 / 2xi) (1/(delta_lo + e/xi) + 1/(delta_hi - e/xi))`` is the
    sensitivity ``dE/de``.
    """
    r = e / xi
    lo = params.delta_lo + r
    hi = params.delta_hi - r
    if not (lo > 0.0 and hi > 0.0):
        raise EnvelopeViolation(
            f"e/xi = {r:.6g} outside (-{params.delta_lo:.6g}, {params.delta_hi:.6g})"
        )
    return 0.5 * math.log(lo / hi), (1.0 / lo + 1.0 / hi) / (2.0 * xi)


def inverse_transform(E: float, xi: float, params: EnvelopeParams) -> float:
    """Recover ``e`` from the transformed error (inverse of :func:`transform_error`)."""
    # (lo + r) / (hi - r) = exp(2E)  =>  r = (hi exp(2E) - lo) / (1 + exp(2E))
    # written with tanh-like form to avoid overflow for large |E|
    if E >= 0.0:
        z = math.exp(-2.0 * E)
        r = (params.delta_hi - params.delta_lo * z) / (z + 1.0)
    else:
        z = math.exp(2.0 * E)
        r = (params.delta_hi * z - params.delta_lo) / (1.0 + z)
    return xi * r


def guard_envelope(e: float, xi: float, epsilon: float, bound: float = 1.0) -> float:
    """Inflate ``xi`` when ``|e|`` has reached ``bound * xi``.

    With the default ``bound = 1`` this is ``xi <- |e| + epsilon`` whenever
    ``|e| > xi``. Guarding on ``|e|`` covers the signed position channels.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if abs(e) > bound * xi:
        return abs(e) / bound + epsilon
    return xi


def transform_vector(
    e: ErrorVector | Sequence[float],
    envelopes: Sequence[EnvelopeState | float],
    params: Sequence[EnvelopeParams],
) -> TransformedError:
    """Channelwise transform; channel 1 is attitude, channels 2-4 position."""
    values = e.as_array() if isinstance(e, ErrorVector) else np.asarray(e, dtype=float)
    out_e = np.empty(4)
    out_d = np.empty(4)
    for i in range(4):
        env = envelopes[i]
        xi = env.xi if isinstance(env, EnvelopeState) else float(env)
        out_e[i], out_d[i] = transform_error(float(values[i]), xi, params[i])
    return TransformedError(
        E_R=float(out_e[0]),
        E_P=out_e[1:].copy(),
        Delta_R=float(out_d[0]),
        Delta_P=np.diag(out_d[1:]),
    )
