"""Random generators shared by several test modules."""

from __future__ import annotations

import numpy as np

from navfilter.checks import random_weighted_landmarks
from navfilter.lie import NavState, random_rotation
from navfilter.measurement import landmark_stats
from navfilter.oracles import ErrorDynamicsInputs


def random_nav_state(rng: np.random.Generator, scale: float = 3.0) -> NavState:
    return NavState(random_rotation(rng), rng.normal(scale=scale, size=3), rng.normal(size=3))


def random_error_inputs(rng: np.random.Generator) -> ErrorDynamicsInputs:
    p_c, _, m = landmark_stats(random_weighted_landmarks(rng))
    v = lambda s: rng.normal(scale=s, size=3)  # noqa: E731
    return ErrorDynamicsInputs(
        omega=v(1.0),
        accel=v(3.0),
        b_omega=v(0.05),
        b_a=v(0.3),
        b_omega_hat=v(0.05),
        b_a_hat=v(0.3),
        w_omega=v(0.5),
        w_v=v(1.0),
        w_a=v(2.0),
        M=m,
        p_c=p_c,
        gravity=np.array([0.0, 0.0, -9.81]),
    )
