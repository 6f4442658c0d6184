"""Nonlinear inertial navigation filter on SE2(3) with prescribed performance envelopes."""

from .envelope import EnvelopeParams, EnvelopeState, ErrorVector, TransformedError
from .errors import NavFilterError
from .filter import (
    FilterConfig,
    FilterGains,
    FilterState,
    EnvelopeSpec,
    QuatFilterState,
    correct,
    predict,
    quat_step,
    step,
)
from .imu import ImuCorruption, ImuSample
from .lie import NavState, TangentElement, se23_exp
from .measurement import Landmark, LandmarkObservation, MeasurementBundle, build_bundle

__all__ = [
    "EnvelopeParams",
    "EnvelopeSpec",
    "EnvelopeState",
    "ErrorVector",
    "FilterConfig",
    "FilterGains",
    "FilterState",
    "ImuCorruption",
    "ImuSample",
    "Landmark",
    "LandmarkObservation",
    "MeasurementBundle",
    "NavFilterError",
    "NavState",
    "QuatFilterState",
    "TangentElement",
    "TransformedError",
    "build_bundle",
    "correct",
    "predict",
    "quat_step",
    "se23_exp",
    "step",
]
