"""Run configuration loaded from YAML.

Every key is optional; omitted gains and envelope settings take the
reference values (``k_w=3, k_v=4, k_a=ell_P=4, gamma_b=2, gamma_a=3,
delta=0.15``, ``ell=1.2`` and ``xi_inf=[0.03, 0.08, 0.08, 0.08]``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError
from .filter import GRAVITY, EnvelopeSpec, FilterGains

MODES = ("simulate", "replay", "validate")
BACKENDS = ("matrix", "quaternion")


@dataclass(frozen=True)
class InitSpec:
    """Initial estimate.

    ``source = "fixed"`` uses ``rot_axis_angle``/``pos``/``vel`` as the
    estimate (the default is ``R = I``, ``P = V = 0``). ``source = "truth"``
    starts from the true initial state perturbed by ``rot_axis_angle``
    (applied on the left), ``pos`` and ``vel`` offsets.
    """

    source: str = "fixed"
    rot_axis_angle: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    vel: tuple[float, float, float] = (0.0, 0.0, 0.0)
    b_omega: tuple[float, float, float] = (0.0, 0.0, 0.0)
    b_a: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SimulateSpec:
    profile: str = "circle"
    duration: float = 30.0
    profile_params: dict[str, float] = field(default_factory=dict)
    imu_rate: float = 200.0
    cam_rate: float = 20.0
    b_omega: tuple[float, float, float] = (0.0, 0.0, 0.0)
    b_a: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sigma_omega: float = 0.0
    sigma_a: float = 0.0
    sigma_y: float = 0.0
    n_landmarks: int = 20
    margin: float = 1.0
    landmark_weight: float = 1.0
    landmarks_file: str | None = None
    start_yaw: float = 0.0
    start_pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    export: bool = True


@dataclass(frozen=True)
class ReplaySpec:
    imu: str | None = None
    groundtruth: str | None = None
    cam_rate: float = 20.0
    sigma_y: float = 0.0
    n_landmarks: int = 20
    margin: float = 1.0
    landmark_weight: float = 1.0
    landmarks_file: str | None = None


@dataclass(frozen=True)
class ValidateSpec:
    mutation: bool = False
    lemma_pairs: int = 1000
    seeds: int = 100


@dataclass(frozen=True)
class RunConfig:
    mode: str = "simulate"
    seed: int = 0
    backend: str = "matrix"
    gains: FilterGains = field(default_factory=FilterGains)
    envelopes: EnvelopeSpec = field(default_factory=EnvelopeSpec)
    epsilon: tuple[float, float, float, float] | None = None
    gravity: tuple[float, float, float] = tuple(GRAVITY)
    correction_dt: str = "elapsed"
    init: InitSpec = field(default_factory=InitSpec)
    simulate: SimulateSpec = field(default_factory=SimulateSpec)
    replay: ReplaySpec = field(default_factory=ReplaySpec)
    validate: ValidateSpec = field(default_factory=ValidateSpec)
    out_dir: str = "navfilter_out"
    base_dir: str = "."

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path


# --- field readers -------------------------------------------------------------------


def _number(value: Any, path: str, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and value <= 0.0:
        raise ConfigError(path, f"must be positive, got {value}")
    if nonneg and value < 0.0:
        raise ConfigError(path, f"must be non-negative, got {value}")
    return value


def _vector(value: Any, path: str, n: int, positive: bool = False, allow_none: bool = False) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(path, f"expected a list of {n} numbers, got {value!r}")
    out = []
    for i, v in enumerate(value):
        if v is None and allow_none:
            out.append(None)
        else:
            out.append(_number(v, f"{path}[{i}]", positive=positive))
    return tuple(out)


def _section(raw: dict, key: str, path: str = "") -> dict:
    value = raw.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(path + key, "expected a mapping")
    return value


def _reject_unknown(section: dict, allowed, path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}{key}", "unknown key")


def _gains(raw: dict) -> FilterGains:
    allowed = FilterGains.__dataclass_fields__
    _reject_unknown(raw, allowed, "gains.")
    values = {k: _number(v, f"gains.{k}", positive=True) for k, v in raw.items()}
    return FilterGains(**values)


def _envelopes(raw: dict) -> tuple[EnvelopeSpec, tuple | None]:
    _reject_unknown(raw, ("xi_inf", "ell", "xi0", "delta", "epsilon"), "envelopes.")
    default = EnvelopeSpec()
    xi_inf = _vector(raw.get("xi_inf", default.xi_inf), "envelopes.xi_inf", 4, positive=True)
    ell = _vector(raw.get("ell", default.ell), "envelopes.ell", 4, positive=True)
    xi0 = raw.get("xi0")
    delta = raw.get("delta")
    if xi0 is not None:
        xi0 = _vector(xi0, "envelopes.xi0", 4, positive=True, allow_none=True)
        for i, (a, b) in enumerate(zip(xi0, xi_inf)):
            if a is not None and a < b:
                raise ConfigError(f"envelopes.xi0[{i}]", f"must not be below xi_inf ({b})")
    if delta is not None:
        delta = _vector(delta, "envelopes.delta", 4, positive=True, allow_none=True)
    eps = raw.get("epsilon")
    if eps is not None:
        eps = _vector(eps, "envelopes.epsilon", 4, positive=True)
    return EnvelopeSpec(xi_inf=xi_inf, ell=ell, xi0=xi0, delta=delta), eps


def _init(raw: dict) -> InitSpec:
    _reject_unknown(raw, InitSpec.__dataclass_fields__, "init.")
    source = raw.get("source", "fixed")
    if source not in ("fixed", "truth"):
        raise ConfigError("init.source", "must be 'fixed' or 'truth'")
    kw = {"source": source}
    for key in ("rot_axis_angle", "pos", "vel", "b_omega", "b_a"):
        if key in raw:
            kw[key] = _vector(raw[key], f"init.{key}", 3)
    return InitSpec(**kw)


def _simulate(raw: dict) -> SimulateSpec:
    from .simulator import PROFILES

    _reject_unknown(raw, SimulateSpec.__dataclass_fields__, "simulate.")
    kw: dict[str, Any] = {}
    if "profile" in raw:
        if raw["profile"] not in PROFILES:
            raise ConfigError("simulate.profile", f"unknown profile {raw['profile']!r}; choose from {sorted(PROFILES)}")
        kw["profile"] = raw["profile"]
    for key in ("duration", "imu_rate", "cam_rate"):
        if key in raw:
            kw[key] = _number(raw[key], f"simulate.{key}", positive=True)
    for key in ("sigma_omega", "sigma_a", "sigma_y"):
        if key in raw:
            kw[key] = _number(raw[key], f"simulate.{key}", nonneg=True)
    for key in ("b_omega", "b_a", "start_pos"):
        if key in raw:
            kw[key] = _vector(raw[key], f"simulate.{key}", 3)
    if "start_yaw" in raw:
        kw["start_yaw"] = _number(raw["start_yaw"], "simulate.start_yaw")
    if "export" in raw:
        if not isinstance(raw["export"], bool):
            raise ConfigError("simulate.export", "expected true or false")
        kw["export"] = raw["export"]
    if "profile_params" in raw:
        params = raw["profile_params"] or {}
        if not isinstance(params, dict):
            raise ConfigError("simulate.profile_params", "expected a mapping")
        kw["profile_params"] = {k: _number(v, f"simulate.profile_params.{k}") for k, v in params.items()}
    kw.update(_landmark_keys(raw, "simulate."))
    return SimulateSpec(**kw)


def _landmark_keys(raw: dict, path: str) -> dict:
    kw: dict[str, Any] = {}
    if "n_landmarks" in raw:
        n = raw["n_landmarks"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 3:
            raise ConfigError(path + "n_landmarks", "must be an integer >= 3")
        kw["n_landmarks"] = n
    if "margin" in raw:
        kw["margin"] = _number(raw["margin"], path + "margin", nonneg=True)
    if "landmark_weight" in raw:
        kw["landmark_weight"] = _number(raw["landmark_weight"], path + "landmark_weight", positive=True)
    if raw.get("landmarks_file") is not None:
        kw["landmarks_file"] = str(raw["landmarks_file"])
    return kw


def _replay(raw: dict) -> ReplaySpec:
    _reject_unknown(raw, ReplaySpec.__dataclass_fields__, "replay.")
    kw: dict[str, Any] = {}
    for key in ("imu", "groundtruth"):
        if raw.get(key) is not None:
            kw[key] = str(raw[key])
    if "cam_rate" in raw:
        kw["cam_rate"] = _number(raw["cam_rate"], "replay.cam_rate", positive=True)
    if "sigma_y" in raw:
        kw["sigma_y"] = _number(raw["sigma_y"], "replay.sigma_y", nonneg=True)
    kw.update(_landmark_keys(raw, "replay."))
    return ReplaySpec(**kw)


def _validate(raw: dict) -> ValidateSpec:
    _reject_unknown(raw, ValidateSpec.__dataclass_fields__, "validate.")
    kw: dict[str, Any] = {}
    if "mutation" in raw:
        if not isinstance(raw["mutation"], bool):
            raise ConfigError("validate.mutation", "expected true or false")
        kw["mutation"] = raw["mutation"]
    for key in ("lemma_pairs", "seeds"):
        if key in raw:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"validate.{key}", "must be a positive integer")
            kw[key] = v
    return ValidateSpec(**kw)


TOP_KEYS = (
    "mode", "seed", "backend", "gains", "envelopes", "gravity", "correction_dt",
    "init", "simulate", "replay", "validate", "out_dir",
)


def config_from_dict(raw: dict | None, base_dir: str | Path = ".") -> RunConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping at the top level")
    _reject_unknown(raw, TOP_KEYS, "")
    mode = raw.get("mode", "simulate")
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}")
    backend = raw.get("backend", "matrix")
    if backend not in BACKENDS:
        raise ConfigError("backend", f"must be one of {BACKENDS}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    correction_dt = raw.get("correction_dt", "elapsed")
    if correction_dt not in ("elapsed", "step"):
        raise ConfigError("correction_dt", "must be 'elapsed' or 'step'")
    envelopes, epsilon = _envelopes(_section(raw, "envelopes"))
    return RunConfig(
        mode=mode,
        seed=seed,
        backend=backend,
        gains=_gains(_section(raw, "gains")),
        envelopes=envelopes,
        epsilon=epsilon,
        gravity=_vector(raw.get("gravity", list(GRAVITY)), "gravity", 3),
        correction_dt=correction_dt,
        init=_init(_section(raw, "init")),
        simulate=_simulate(_section(raw, "simulate")),
        replay=_replay(_section(raw, "replay")),
        validate=_validate(_section(raw, "validate")),
        out_dir=str(raw.get("out_dir", "navfilter_out")),
        base_dir=str(base_dir),
    )


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML run configuration; an empty file yields the defaults."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    return config_from_dict(raw, base_dir=path.parent)


def initial_errors_admissible(e0: np.ndarray, envelopes) -> list[str]:
    """Names of channels violating ``delta_lo = delta_hi > |e0|`` or ``xi0 > |e0|``."""
    bad = []
    for i, p in enumerate(envelopes):
        if not p.admits(float(e0[i])):
            bad.append(f"e{i + 1}")
    return bad
