"""Discrimination of two pure qubit states from ``M`` copies.

Hypotheses are ``|phi_+-> = cos(a)|0> +- sin(a)|1>`` with prior ``q`` on
``+``.  Measurements are projective and lie in the real Bloch plane; a basis
is labelled by the angle ``b`` of its first vector ``cos(b)|0> + sin(b)|1>``,
whose outcome is read as a vote for ``+``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QubitPair",
    "DiscriminationRecord",
    "DolinarMapping",
    "SchemeResult",
    "helstrom_bound",
    "local_helstrom_angle",
    "adaptive_local_run",
    "majority_vote_run",
    "simulate_adaptive",
    "simulate_majority",
    "dolinar_qubit_limit",
    "dolinar_asymptotic_error",
]

_Q_CLAMP = 1e-12


@dataclass(frozen=True)
class QubitPair:
    """Two real qubit states separated by twice ``alpha``.

    ``alpha = 0`` (identical states) is admitted as a degenerate limit.
    """

    alpha: float
    q: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= math.pi / 4 + 1e-15:
            raise ValueError("alpha must lie in [0, pi/4]")
        if not 0.0 < self.q < 1.0:
            raise ValueError("prior q must lie in (0, 1)")

    @classmethod
    def from_overlap(cls, overlap: float, q: float = 0.5) -> "QubitPair":
        if not 0.0 <= overlap <= 1.0:
            raise ValueError("overlap must lie in [0, 1]")
        return cls(0.5 * math.acos(overlap), q)

    @property
    def overlap(self) -> float:
        return math.cos(2.0 * self.alpha)


@dataclass
class DiscriminationRecord:
    bases: np.ndarray       # measurement angle per copy
    outcomes: np.ndarray    # 1 = vote for "+", per copy
    posterior: np.ndarray   # q_0 .. q_M
    guess: int              # 1 for "+", 0 for "-"
    truth: int

    @property
    def error(self) -> bool:
        return self.guess != self.truth


@dataclass(frozen=True)
class SchemeResult:
    """Aggregate of many simulated discriminations."""

    errors: np.ndarray            # bool per trial
    mean_increments: np.ndarray   # mean of q_{t+1} - q_t for each copy t
    se_increments: np.ndarray

    @property
    def error_rate(self) -> float:
        return float(np.mean(self.errors))

    @property
    def standard_error(self) -> float:
        p = self.error_rate
        return math.sqrt(max(p * (1 - p), 1e-300) / self.errors.size)


def helstrom_bound(q: float, overlap: float) -> float:
    """Minimum error probability for two pure states with prior ``q``."""
    if not 0.0 <= q <= 1.0 or not 0.0 <= overlap <= 1.0:
        raise ValueError("q and overlap must lie in [0, 1]")
    disc = max(0.0, 1.0 - 4.0 * q * (1.0 - q) * overlap ** 2)
    return 0.5 * (1.0 - math.sqrt(disc))


def local_helstrom_angle(alpha, q):
    """Basis angle of the single-copy Helstrom measurement.

    The first basis vector is the positive eigenvector of
    ``q|phi+><phi+| - (1-q)|phi-><phi-|``.
    """
    alpha = np.asarray(alpha, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * np.arctan2(np.sin(2 * alpha), (2 * q - 1) * np.cos(2 * alpha))


def _vote_probs(alpha, beta):
    """P(vote '+' | +), P(vote '+' | -) for basis angle ``beta``."""
    return np.cos(beta - alpha) ** 2, np.cos(beta + alpha) ** 2


def _bayes(q, vote, pp, pm):
    like_p = np.where(vote == 1, pp, 1.0 - pp)
    like_m = np.where(vote == 1, pm, 1.0 - pm)
    num = q * like_p
    den = num + (1.0 - q) * like_m
    post = np.where(den > 0, num / np.where(den > 0, den, 1.0), q)
    return np.clip(post, _Q_CLAMP, 1.0 - _Q_CLAMP)


def _simulate(pair: QubitPair, M: int, trials: int, rng, adaptive: bool):
    if M < 1:
        raise ValueError("M must be >= 1")
    u = rng.random((trials, M + 2))
    truth = (u[:, 0] < pair.q).astype(int)
    q = np.full(trials, pair.q)
    qs = [q]
    bases = np.empty((trials, M))
    votes = np.empty((trials, M), dtype=int)
    fixed = math.pi / 4
    for t in range(M):
        beta = local_helstrom_angle(pair.alpha, q) if adaptive else np.full(trials, fixed)
        pp, pm = _vote_probs(pair.alpha, beta)
        p_vote = np.where(truth == 1, pp, pm)
        v = (u[:, t + 1] < p_vote).astype(int)
        q = _bayes(q, v, pp, pm)
        bases[:, t] = beta
        votes[:, t] = v
        qs.append(q)
    coin = (u[:, M + 1] < 0.5).astype(int)
    if adaptive:
        guess = np.where(q > 0.5, 1, np.where(q < 0.5, 0, coin))
    else:
        tally = 2 * votes.sum(axis=1) - M
        guess = np.where(tally > 0, 1, np.where(tally < 0, 0, coin))
    return truth, bases, votes, np.stack(qs, axis=1), guess


def _result(truth, qs, guess):
    inc = np.diff(qs, axis=1)
    n = inc.shape[0]
    return SchemeResult(
        errors=guess != truth,
        mean_increments=inc.mean(axis=0),
        se_increments=inc.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(inc.shape[1]),
    )


def adaptive_local_run(pair: QubitPair, M: int, rng: np.random.Generator) -> DiscriminationRecord:
    """One run of the locally optimal adaptive scheme.

    Each copy is measured in the Helstrom basis for the current posterior
    odds; the posterior is then updated by Bayes' rule.
    """
    truth, bases, votes, qs, guess = _simulate(pair, M, 1, rng, adaptive=True)
    return DiscriminationRecord(bases[0], votes[0], qs[0], int(guess[0]), int(truth[0]))


def majority_vote_run(pair: QubitPair, M: int, rng: np.random.Generator) -> DiscriminationRecord:
    """Fixed unbiased basis on every copy, guess by majority (coin on ties)."""
    truth, bases, votes, qs, guess = _simulate(pair, M, 1, rng, adaptive=False)
    return DiscriminationRecord(bases[0], votes[0], qs[0], int(guess[0]), int(truth[0]))


def simulate_adaptive(pair: QubitPair, M: int, trials: int, seed: int) -> SchemeResult:
    truth, _, _, qs, guess = _simulate(pair, M, trials, np.random.default_rng(seed), True)
    return _result(truth, qs, guess)


def simulate_majority(pair: QubitPair, M: int, trials: int, seed: int) -> SchemeResult:
    truth, _, _, qs, guess = _simulate(pair, M, trials, np.random.default_rng(seed), False)
    return _result(truth, qs, guess)


@dataclass(frozen=True)
class DolinarMapping:
    pair: QubitPair
    segments: int
    segment_excitation: float
    predicted_error: float     # Helstrom bound for the M-segment ensemble
    asymptotic_error: float    # M -> infinity limit


def dolinar_asymptotic_error(delta_alpha: float) -> float:
    """Helstrom error for coherent states ``|+-alpha>`` with ``2 alpha = delta_alpha``."""
    return helstrom_bound(0.5, math.exp(-abs(delta_alpha) ** 2 / 2.0))


def dolinar_qubit_limit(delta_alpha: float, M: int, q: float = 0.5) -> DolinarMapping:
    """Split coherent states ``|+-alpha>`` into ``M`` weak segments.

    Each segment is approximated by the qubit ``|0> +- (alpha/sqrt(M))|1>``.
    """
    a = abs(delta_alpha) / 2.0
    excitation = a * a / M
    if excitation > 0.1:
        raise ValueError(f"segment too strong: mean excitation {excitation:.3g} > 0.1")
    if M < max(4, 10 * abs(delta_alpha) ** 2):
        raise ValueError("need M >= max(4, 10*|delta_alpha|^2) segments")
    pair = QubitPair(math.atan(a / math.sqrt(M)), q)
    return DolinarMapping(
        pair=pair,
        segments=M,
        segment_excitation=excitation,
        predicted_error=helstrom_bound(q, pair.overlap ** M),
        asymptotic_error=dolinar_asymptotic_error(delta_alpha),
    )
