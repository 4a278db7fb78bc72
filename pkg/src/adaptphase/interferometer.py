"""Single-qubit multipass interferometer model.

A qubit prepared in ``|+>`` picks up the auxiliary phase ``theta`` on ``|0>``
and ``p`` applications of the unknown phase on ``|1>``, then is measured in
the X basis.  Outcome ``u = 0`` corresponds to ``|+>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MeasurementSetting",
    "Shot",
    "likelihood",
    "prob_zero",
    "outcome_from_uniform",
    "sample_outcome",
    "trial_rng",
]


@dataclass(frozen=True)
class MeasurementSetting:
    """One shot: ``p`` passes through the phase gate, auxiliary phase ``theta``."""

    p: int
    theta: float

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"pass count must be a positive integer, got {self.p!r}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))


@dataclass(frozen=True)
class Shot:
    setting: MeasurementSetting
    outcome: int

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError(f"outcome must be a bit, got {self.outcome!r}")


def prob_zero(phi, p, theta):
    """Probability of outcome 0; broadcasts over array arguments."""
    return 0.5 * (1.0 + np.cos(np.multiply(p, phi) - theta))


def likelihood(u: int, phi: float, s: MeasurementSetting) -> float:
    """``P(u | phi; p, theta) = [1 + (-1)**u cos(p*phi - theta)] / 2``."""
    if u not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    p0 = float(prob_zero(phi, s.p, s.theta))
    return p0 if u == 0 else 1.0 - p0


def outcome_from_uniform(p0, uniform):
    """Inverse-CDF draw: 0 when ``uniform < p0``.  Broadcasts."""
    return np.where(np.asarray(uniform) < p0, 0, 1)


def sample_outcome(phi: float, s: MeasurementSetting, rng: np.random.Generator) -> int:
    return int(outcome_from_uniform(prob_zero(phi, s.p, s.theta), rng.random()))


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent stream for one trial, a pure function of ``(seed, trial_index)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.PCG64(ss))
