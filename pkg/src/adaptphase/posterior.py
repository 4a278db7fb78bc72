"""Phase posteriors stored as truncated Fourier series.

A density on the circle that has only absorbed sinusoidal likelihoods is a
trigonometric polynomial, so it is represented exactly by its moments
``c_n = E[exp(i n phi)]`` for ``0 <= n <= H``.  Negative harmonics follow from
``c_{-n} = conj(c_n)`` and are never stored.

The row-wise helpers (``update_rows``, ``circular_mean_rows``) operate on a
2-D array holding one posterior per row; the Monte Carlo engine uses them to
advance many independent trials in lockstep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DegenerateLikelihoodError",
    "UndefinedEstimateError",
    "PhasePosterior",
    "DIVERGENT",
    "uniform_prior",
    "bayes_update",
    "update_rows",
    "grid_bayes_oracle",
    "circular_mean",
    "circular_mean_rows",
    "holevo_variance_of_posterior",
    "holevo_variance_of_samples",
    "wrap_angle",
]

TWO_PI = 2.0 * math.pi

#: In-band value returned when the mean resultant length vanishes.
DIVERGENT = math.inf

_MIN_EVIDENCE = 1e-300
_MIN_SHARPNESS = 1e-12


class DegenerateLikelihoodError(ValueError):
    """An observed outcome had zero probability under the prior."""


class UndefinedEstimateError(ValueError):
    """The first moment vanishes, so no circular mean exists."""


@dataclass(frozen=True)
class PhasePosterior:
    """Density over phase in ``[0, 2*pi)`` held as Fourier moments.

    Parameters
    ----------
    coeffs : np.ndarray
        Complex moments ``c_0 .. c_H`` with ``c_0 == 1``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-D sequence")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def max_harmonic(self) -> int:
        return self.coeffs.size - 1

    def density(self, phi):
        """Evaluate the density at ``phi`` (scalar or array)."""
        phi = np.asarray(phi, dtype=float)
        n = np.arange(1, self.coeffs.size)
        terms = np.real(self.coeffs[1:] * np.exp(-1j * np.multiply.outer(phi, n)))
        return (1.0 + 2.0 * terms.sum(axis=-1)) / TWO_PI

    def shifted(self, delta: float) -> "PhasePosterior":
        """Posterior of ``phi + delta``."""
        n = np.arange(self.coeffs.size)
        return PhasePosterior(self.coeffs * np.exp(1j * n * delta))


def uniform_prior() -> PhasePosterior:
    return PhasePosterior(np.ones(1, dtype=complex))


def update_rows(coeffs, H, p, theta, u):
    """Absorb one interferometer outcome into every row of ``coeffs``.

    ``coeffs`` has shape ``(B, W)`` with ``W >= H + p + 1``; columns above
    ``H`` must be zero.  ``theta`` and ``u`` broadcast over rows.  Returns
    the new array (the input is not modified).

    Raises
    ------
    DegenerateLikelihoodError
        If any row assigns the outcome a probability below 1e-300.
    """
    coeffs = np.asarray(coeffs)
    B, width = coeffs.shape
    Hn = H + p
    if width < Hn + 1:
        raise ValueError(f"coefficient buffer too narrow: need {Hn + 1}, have {width}")
    sign = np.where(np.asarray(u) == 0, 1.0, -1.0)
    ep = (sign * np.exp(-1j * np.asarray(theta, dtype=float)) / 4.0)
    ep = np.broadcast_to(ep, (B,))[:, None]
    em = np.broadcast_to(sign * np.exp(1j * np.asarray(theta, dtype=float)) / 4.0, (B,))[:, None]

    new = np.zeros_like(coeffs)
    new[:, : H + 1] = 0.5 * coeffs[:, : H + 1]
    # c_{n+p}
    if H - p >= 0:
        new[:, : H - p + 1] += ep * coeffs[:, p : H + 1]
    # c_{n-p} for n >= p
    new[:, p : Hn + 1] += em * coeffs[:, : H + 1]
    # c_{n-p} = conj(c_{p-n}) for n < p
    lo = max(0, p - H)
    if lo < p:
        new[:, lo:p] += em * np.conj(coeffs[:, p - lo : 0 : -1])

    evidence = new[:, 0].real
    if np.any(evidence <= _MIN_EVIDENCE):
        bad = int(np.argmax(evidence <= _MIN_EVIDENCE))
        raise DegenerateLikelihoodError(
            f"outcome has zero probability under the prior (row {bad})"
        )
    new /= evidence[:, None]
    new[:, 0] = 1.0
    return new


def bayes_update(post: PhasePosterior, p: int, theta: float, u: int) -> PhasePosterior:
    """Condition on outcome ``u`` of a ``p``-pass shot with auxiliary phase ``theta``.

    The likelihood is ``[1 + (-1)**u cos(p*phi - theta)] / 2``.
    """
    if p < 1:
        raise ValueError("pass count must be >= 1")
    if u not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    H = post.max_harmonic
    buf = np.zeros((1, H + p + 1), dtype=complex)
    buf[0, : H + 1] = post.coeffs
    return PhasePosterior(update_rows(buf, H, p, theta, u)[0])


def _as_triple(shot):
    if hasattr(shot, "setting"):
        return shot.setting.p, shot.setting.theta, shot.outcome
    p, theta, u = shot
    return p, theta, u


def grid_bayes_oracle(shots: Iterable, grid_size: int = 4096) -> PhasePosterior:
    """Brute-force posterior by pointwise likelihood products on a grid.

    ``shots`` holds ``Shot`` objects or ``(p, theta, u)`` triples.  Moments
    are recovered with the rectangle rule, which is exact for trigonometric
    polynomials of degree below ``grid_size``.
    """
    triples = [_as_triple(s) for s in shots]
    H = sum(int(p) for p, _, _ in triples)
    if grid_size < 16 * H:
        raise ValueError(f"grid_size must be >= 16*H = {16 * H}")
    phi = np.arange(grid_size) * (TWO_PI / grid_size)
    dens = np.ones(grid_size)
    for p, theta, u in triples:
        dens *= 0.5 * (1.0 + (-1.0) ** u * np.cos(p * phi - theta))
        # rescale to dodge underflow; normalisation is restored below
        peak = dens.max()
        if peak <= _MIN_EVIDENCE:
            raise DegenerateLikelihoodError("outcome has zero probability under the prior")
        dens /= peak
    total = dens.sum()
    if total <= _MIN_EVIDENCE:
        raise DegenerateLikelihoodError("outcome has zero probability under the prior")
    n = np.arange(H + 1)
    coeffs = np.exp(1j * np.outer(n, phi)) @ dens / total
    coeffs[0] = 1.0
    return PhasePosterior(coeffs)


def circular_mean(post: PhasePosterior) -> float:
    """``arg(c_1)`` mapped to ``[0, 2*pi)``."""
    if post.max_harmonic < 1 or abs(post.coeffs[1]) < _MIN_SHARPNESS:
        raise UndefinedEstimateError("first moment vanishes; circular mean undefined")
    return float(np.angle(post.coeffs[1]) % TWO_PI)


def circular_mean_rows(coeffs) -> np.ndarray:
    """Row-wise ``arg(c_1)`` in ``[0, 2*pi)``; NaN where ``|c_1|`` vanishes."""
    c1 = np.asarray(coeffs)[:, 1]
    est = np.angle(c1) % TWO_PI
    return np.where(np.abs(c1) < _MIN_SHARPNESS, np.nan, est)


def _holevo(sharpness: float) -> float:
    if sharpness < _MIN_SHARPNESS:
        return DIVERGENT
    return max(sharpness ** -2 - 1.0, 0.0)


def holevo_variance_of_posterior(post: PhasePosterior) -> float:
    if post.max_harmonic < 1:
        return DIVERGENT
    return _holevo(abs(post.coeffs[1]))


def holevo_variance_of_samples(errors: Sequence[float]) -> float:
    """Holevo variance ``|mean exp(i*delta)|**-2 - 1`` of angular errors."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("need at least one sample")
    return _holevo(float(abs(np.mean(np.exp(1j * errors)))))


def wrap_angle(x):
    """Map angles into ``(-pi, pi]``."""
    y = np.mod(np.asarray(x, dtype=float) + math.pi, TWO_PI) - math.pi
    return np.where(y == -math.pi, math.pi, y)
