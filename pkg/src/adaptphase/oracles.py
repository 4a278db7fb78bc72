"""Exact reference values for phase estimation.

Canonical phase measurement on symmetric states, the SQL and Heisenberg
limit formulas, the QPEA error distribution (a Fejer kernel) and Fisher
information.  These are the targets the Monte Carlo simulations are checked
against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .posterior import DIVERGENT

__all__ = [
    "SymmetricState",
    "optimal_state",
    "flat_state",
    "noon_state",
    "canonical_sharpness",
    "canonical_holevo_variance",
    "canonical_density",
    "canonical_cdf",
    "canonical_sample",
    "fejer_kernel",
    "qpea_error_density",
    "qpea_distribution",
    "qpea_hwhm",
    "holevo_variance_by_quadrature",
    "fisher_information",
    "root_fisher_information",
    "helstrom_phase_limits",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SymmetricState:
    """Real amplitudes ``psi_0 .. psi_N`` over the symmetrised number basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-D sequence")
        if abs(float(c @ c) - 1.0) > 1e-12:
            raise ValueError("state is not normalised")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.coeffs.size - 1

    @classmethod
    def from_unnormalised(cls, amplitudes) -> "SymmetricState":
        a = np.asarray(amplitudes, dtype=float)
        return cls(a / np.linalg.norm(a))


def optimal_state(N: int) -> SymmetricState:
    """Minimum-Holevo-variance input, ``psi_n ~ sin((n+1) pi / (N+2))``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(N + 1)
    return SymmetricState.from_unnormalised(np.sin((n + 1) * math.pi / (N + 2)))


def flat_state(N: int) -> SymmetricState:
    if N < 1:
        raise ValueError("N must be >= 1")
    return SymmetricState(np.full(N + 1, 1.0 / math.sqrt(N + 1)))


def noon_state(N: int) -> SymmetricState:
    if N < 1:
        raise ValueError("N must be >= 1")
    a = np.zeros(N + 1)
    a[0] = a[-1] = 1.0
    return SymmetricState.from_unnormalised(a)


def canonical_sharpness(state: SymmetricState) -> float:
    """``<cos(Phi - phi)>`` under canonical measurement: ``sum psi_n psi_{n+1}``."""
    c = state.coeffs
    return float(np.dot(c[:-1], c[1:]))


def canonical_holevo_variance(state: SymmetricState) -> float:
    s = canonical_sharpness(state)
    if s < 1e-12:
        return DIVERGENT
    return s ** -2 - 1.0


def _autocorrelation(c):
    # R_d = sum_n psi_n psi_{n+d}, d = 0..N
    return np.array([np.dot(c[: c.size - d], c[d:]) for d in range(c.size)])


def canonical_density(delta, state: SymmetricState):
    """Density of the error ``Phi - phi`` of a canonical measurement."""
    delta = np.asarray(delta, dtype=float)
    n = np.arange(state.coeffs.size)
    amp = np.exp(-1j * np.multiply.outer(delta, n)) @ state.coeffs
    return np.abs(amp) ** 2 / TWO_PI


def canonical_cdf(delta, state: SymmetricState):
    """Closed-form CDF of the canonical error density on ``[-pi, pi]``."""
    delta = np.asarray(delta, dtype=float)
    R = _autocorrelation(state.coeffs)
    d = np.arange(1, R.size)
    base = (delta + math.pi) / TWO_PI * R[0]
    if d.size == 0:
        return base
    # sin(d * -pi) vanishes, so only the upper limit contributes
    osc = np.sin(np.multiply.outer(delta, d)) @ (R[1:] / d)
    return base + osc / math.pi


def _inverse_cdf_table(state: SymmetricState, tol: float = 1e-6):
    size = 2 ** 14
    while True:
        x = np.linspace(-math.pi, math.pi, size + 1)
        F = canonical_cdf(x, state)
        mid = 0.5 * (x[:-1] + x[1:])
        err = np.max(np.abs(0.5 * (F[:-1] + F[1:]) - canonical_cdf(mid, state)))
        if err < tol or size >= 2 ** 22:
            F = np.maximum.accumulate(F)
            F[0], F[-1] = 0.0, 1.0
            return x, F
        size *= 2


def canonical_sample(state: SymmetricState, phi: float, rng: np.random.Generator, size=None):
    """Draw canonical phase-measurement outcomes ``Phi`` given true phase ``phi``.

    Inverse-CDF sampling with linear interpolation on a grid refined until
    the interpolation error is below 1e-6 in probability.
    """
    x, F = _inverse_cdf_table(state)
    u = rng.random(size)
    delta = np.interp(u, F, x)
    out = np.mod(phi + delta, TWO_PI)
    return float(out) if size is None else out


def fejer_kernel(delta, L: int):
    """``sin^2(L x/2) / (L sin^2(x/2))``; equals ``L`` at ``x = 0``.

    Normalised so that ``(1/2pi) * integral over a period = 1``.
    """
    delta = np.asarray(delta, dtype=float)
    x = np.mod(delta + math.pi, TWO_PI) - math.pi
    small = np.abs(x) < 1e-6
    xs = np.where(small, 1.0, x)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.sin(L * xs / 2) ** 2 / (L * np.sin(xs / 2) ** 2)
    series = L * (1.0 - (L * L - 1.0) * x * x / 12.0)
    out = np.where(small, series, val)
    return float(out) if out.ndim == 0 else out


def qpea_error_density(delta, N: int):
    """QPEA error kernel in its common closed form, ``sin^2(N d/2)/(N sin^2(d/2))``.

    The probability density with respect to ``d`` is this value over
    ``2*pi``.  For a QPEA run with ``N = 2**(K+1) - 1`` resources the exact
    distribution uses the register size ``N + 1`` instead; see
    :func:`qpea_distribution`.  The two agree to leading order in ``1/N``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    return fejer_kernel(delta, N)


def qpea_distribution(delta, N: int):
    """Exact QPEA error density (per radian) for ``N`` resources.

    A register of ``K + 1`` qubits spans ``N + 1 = 2**(K+1)`` basis states,
    so the canonical measurement on the flat state yields the Fejer kernel
    of order ``N + 1``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    return fejer_kernel(delta, N + 1) / TWO_PI


def qpea_hwhm(N: int) -> float:
    """Half width at half maximum of :func:`qpea_error_density`."""
    f = lambda x: fejer_kernel(x, N) / N - 0.5
    return brentq(f, 1e-12, TWO_PI / N, xtol=1e-15)


def holevo_variance_by_quadrature(density, points: int = 1 << 16) -> float:
    """Holevo variance of a per-radian error density on ``(-pi, pi]``.

    Uses the periodic rectangle rule, which is exact for trigonometric
    polynomials of degree below ``points``.
    """
    x = -math.pi + (np.arange(points) + 0.5) * (TWO_PI / points)
    w = density(x) * (TWO_PI / points)
    mass = w.sum()
    s = abs(np.sum(w * np.exp(1j * x))) / mass
    if s < 1e-12:
        return DIVERGENT
    return s ** -2 - 1.0


def fisher_information(state: SymmetricState, points: int | None = None) -> float:
    """Classical Fisher information of the canonical outcome about ``phi``.

    Computed by quadrature of ``(d P/d phi)^2 / P`` over the outcome.
    """
    c = state.coeffs
    N = c.size - 1
    if N == 0:
        return 0.0
    points = points or max(4096, 64 * (N + 1))
    # half-step offset keeps nodes off isolated zeros of the density
    x = (np.arange(points) + 0.5) * (TWO_PI / points)
    n = np.arange(N + 1)
    phase = np.exp(-1j * np.outer(x, n))
    amp = phase @ c
    damp = phase @ (-1j * n * c)
    P = np.abs(amp) ** 2
    dP = 2.0 * np.real(np.conj(amp) * damp)
    ratio = np.where(P > 1e-300, dP ** 2 / np.where(P > 1e-300, P, 1.0), 4 * np.abs(damp) ** 2)
    return float(np.sum(ratio) / points)


def root_fisher_information(state: SymmetricState) -> float:
    """``sqrt(F)``: the inverse of the single-shot Cramer-Rao standard deviation."""
    return math.sqrt(fisher_information(state))


def helstrom_phase_limits(N: int) -> dict:
    """Reference variances: SQL ``1/N``, exact HL and its asymptote ``(pi/N)^2``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return {
        "SQL": 1.0 / N,
        "HL": math.tan(math.pi / (N + 2)) ** 2,
        "HL_asymptotic": (math.pi / N) ** 2,
    }
