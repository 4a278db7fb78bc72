"""Protocol schedulers for multipass phase estimation.

Every protocol fixes its sequence of pass counts up front; only the
auxiliary phases depend on the record.  A :class:`ProtocolSchedule` therefore
compiles to a static plan of :class:`PlannedShot` entries, and
:class:`LockstepRuns` advances any number of independent trials through that
plan at once, one row per trial.  :class:`ProtocolRun` is the single-trial
view used for stepping a protocol by hand.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from .interferometer import MeasurementSetting, Shot
from .posterior import PhasePosterior, UndefinedEstimateError, circular_mean_rows, update_rows

__all__ = [
    "Kind",
    "ProtocolSchedule",
    "PlannedShot",
    "LockstepRuns",
    "ProtocolRun",
    "OutOfOrderShotError",
    "IncompleteRunError",
    "DONE",
    "start_run",
    "next_setting",
    "absorb_result",
    "finalize",
    "locally_optimal_theta",
    "locally_optimal_theta_rows",
    "expected_sharpness",
    "nala_repetitions",
]

TWO_PI = 2.0 * math.pi

_GRID_POINTS = 64
_GOLDEN_TOL = 1e-10
_FLAT_TOL = 1e-13
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

DONE = None


class OutOfOrderShotError(ValueError):
    """A result did not match the setting the run last issued."""


class IncompleteRunError(RuntimeError):
    """An estimate was requested before the resource budget was spent."""


class Kind(str, enum.Enum):
    STANDARD = "standard"
    ADAPTIVE_STANDARD = "adaptive_standard"
    QPEA = "qpea"
    GQPEA = "gqpea"
    HYBRID = "hybrid"
    NALA = "nala"
    NALA_TWO_THETA = "nala_two_theta"


# how the auxiliary phase of a planned shot is produced
_SWEEP = "sweep"      # theta_init + offset
_SCALED = "scaled"    # p * theta_init + offset
_REGISTER = "register"  # p * theta_current (QPEA feedback register)
_LOCAL = "local"      # locally optimal Bayesian choice


@dataclass(frozen=True)
class PlannedShot:
    level: int
    p: int
    index: int      # position within its level (or stage)
    rule: str
    offset: float = 0.0


def nala_repetitions(K: int, k: int, M_K: int, mu: float) -> int:
    """Shots at level ``k``: ``M_K + floor(mu*(K-k))``, at least one."""
    return max(1, M_K + math.floor(mu * (K - k)))


@dataclass(frozen=True)
class ProtocolSchedule:
    """Protocol identifier plus parameters.

    ``M`` is the per-level repetition count for GQPEA and the total number
    of single-pass qubits for the two standard schemes.  ``total`` fixes the
    overall budget of a hybrid run; when omitted it is derived from ``K``.
    """

    kind: Kind
    K: int = 0
    M: int = 1
    M_K: int = 1
    mu: float = 0.0
    hybrid_qpea_fraction: float = 2.0 / 3.0
    total: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.kind is Kind.NALA:
            if self.M_K < 1:
                raise ValueError("M_K must be >= 1")
            if self.mu < 0:
                raise ValueError("mu must be >= 0")
        if self.kind is Kind.HYBRID:
            f = self.hybrid_qpea_fraction
            if not 0.0 < f < 1.0:
                raise ValueError("hybrid_qpea_fraction must lie in (0, 1)")
            if self.total is not None and self.total * f < 1.0:
                raise ValueError("hybrid budget too small for a QPEA stage")

    # -- constructors -----------------------------------------------------
    @classmethod
    def standard(cls, N: int) -> "ProtocolSchedule":
        return cls(Kind.STANDARD, M=N)

    @classmethod
    def adaptive_standard(cls, N: int) -> "ProtocolSchedule":
        return cls(Kind.ADAPTIVE_STANDARD, M=N)

    @classmethod
    def qpea(cls, K: int) -> "ProtocolSchedule":
        return cls(Kind.QPEA, K=K)

    @classmethod
    def gqpea(cls, K: int, M: int) -> "ProtocolSchedule":
        return cls(Kind.GQPEA, K=K, M=M)

    @classmethod
    def hybrid(cls, total: int, fraction: float = 2.0 / 3.0) -> "ProtocolSchedule":
        f = fraction
        if total * f < 1.0:
            raise ValueError("hybrid budget too small for a QPEA stage")
        K = max(k for k in range(64) if 2 ** (k + 1) - 1 <= f * total)
        return cls(Kind.HYBRID, K=K, hybrid_qpea_fraction=f, total=total)

    @classmethod
    def nala(cls, K: int, M_K: int, mu: float) -> "ProtocolSchedule":
        return cls(Kind.NALA, K=K, M_K=M_K, mu=mu)

    @classmethod
    def nala_two_theta(cls, K: int) -> "ProtocolSchedule":
        return cls(Kind.NALA_TWO_THETA, K=K, M_K=18, mu=16.0 * math.log(2.0))

    # -- derived quantities -------------------------------------------------
    def level_repetitions(self, k: int) -> int:
        if self.kind is Kind.GQPEA:
            return self.M
        if self.kind in (Kind.NALA, Kind.NALA_TWO_THETA):
            return nala_repetitions(self.K, k, self.M_K, self.mu)
        return 1

    @property
    def hybrid_standard_shots(self) -> int:
        qpea = 2 ** (self.K + 1) - 1
        if self.total is not None:
            return self.total - qpea
        f = self.hybrid_qpea_fraction
        return max(0, math.ceil(qpea * (1.0 - f) / f - 1e-9))

    @cached_property
    def plan(self) -> Tuple[PlannedShot, ...]:
        kind = self.kind
        shots: List[PlannedShot] = []
        if kind in (Kind.STANDARD, Kind.ADAPTIVE_STANDARD):
            n = self.M
            for j in range(n):
                if kind is Kind.STANDARD:
                    shots.append(PlannedShot(0, 1, j, _SWEEP, j * math.pi / n))
                else:
                    shots.append(PlannedShot(0, 1, j, _LOCAL))
            return tuple(shots)

        for k in range(self.K, -1, -1):
            p = 2 ** k
            reps = self.level_repetitions(k)
            for j in range(reps):
                if kind in (Kind.QPEA, Kind.HYBRID):
                    shots.append(PlannedShot(k, p, j, _REGISTER))
                elif kind is Kind.GQPEA:
                    shots.append(PlannedShot(k, p, j, _LOCAL))
                elif kind is Kind.NALA:
                    shots.append(PlannedShot(k, p, j, _SCALED, j * math.pi / reps))
                else:
                    shots.append(PlannedShot(k, p, j, _SCALED, (j % 2) * math.pi / 2))
        if kind is Kind.HYBRID:
            n1 = self.hybrid_standard_shots
            for j in range(n1):
                shots.append(PlannedShot(-1, 1, j, _SWEEP, j * math.pi / n1))
        return tuple(shots)

    @property
    def N(self) -> int:
        """Total resources: the sum of pass counts over the plan."""
        return sum(s.p for s in self.plan)

    def describe(self) -> str:
        k = self.kind
        if k in (Kind.STANDARD, Kind.ADAPTIVE_STANDARD):
            return f"{k.value}(N={self.N})"
        if k is Kind.GQPEA:
            return f"gqpea(K={self.K}, M={self.M})"
        if k is Kind.NALA:
            return f"nala(K={self.K}, M_K={self.M_K}, mu={self.mu})"
        if k is Kind.HYBRID:
            return f"hybrid(N={self.N}, K={self.K})"
        return f"{k.value}(K={self.K})"


# -- local optimisation of the auxiliary phase --------------------------------

def _moment(coeffs, m):
    """Column ``m`` of a row-wise moment array, using conjugate symmetry."""
    B, width = coeffs.shape
    if m < 0:
        return np.conj(_moment(coeffs, -m))
    if m >= width:
        return np.zeros(B, dtype=complex)
    return coeffs[:, m]


def expected_sharpness(coeffs, p, theta, harmonic):
    """Outcome-averaged ``|c_harmonic|`` after a ``p``-pass shot at ``theta``.

    Equals ``sum_u |c'_harmonic(u; theta)|`` with unnormalised post-shot
    moments, since each branch is weighted by its own probability.
    ``theta`` may carry trailing axes beyond the row axis.
    """
    coeffs = np.atleast_2d(coeffs)
    theta = np.asarray(theta, dtype=float)
    extra = (None,) * (theta.ndim - 1) if theta.ndim >= 1 else ()
    sl = (slice(None),) + extra
    a = (_moment(coeffs, harmonic) / 2.0)[sl]
    up = _moment(coeffs, harmonic + p)[sl]
    dn = _moment(coeffs, harmonic - p)[sl]
    b = (np.exp(-1j * theta) * up + np.exp(1j * theta) * dn) / 4.0
    return np.abs(a + b) + np.abs(a - b)


def locally_optimal_theta_rows(coeffs, p, harmonic=None):
    """Row-wise maximiser of :func:`expected_sharpness`.

    Scans a 64-point grid, keeps the first (smallest-angle) best point and
    refines it by golden-section search to 1e-10.  Returns ``(theta, flat)``
    where ``flat`` flags rows whose objective does not depend on ``theta``;
    those rows get ``theta = 0``.
    """
    coeffs = np.atleast_2d(coeffs)
    harmonic = p if harmonic is None else harmonic
    B = coeffs.shape[0]
    step = TWO_PI / _GRID_POINTS
    grid = np.arange(_GRID_POINTS) * step
    g = expected_sharpness(coeffs, p, np.broadcast_to(grid, (B, _GRID_POINTS)), harmonic)
    best = np.argmax(g, axis=1)
    flat = (g.max(axis=1) - g.min(axis=1)) <= _FLAT_TOL * np.maximum(1.0, g.max(axis=1))

    a = grid[best] - step
    b = grid[best] + step
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1 = expected_sharpness(coeffs, p, x1, harmonic)
    f2 = expected_sharpness(coeffs, p, x2, harmonic)
    n_iter = math.ceil(math.log(_GOLDEN_TOL / (2 * step)) / math.log(_INV_PHI))
    for _ in range(n_iter):
        left = f1 >= f2
        # left probe wins: keep [a, x2]; otherwise keep [x1, b]
        a, b = np.where(left, a, x1), np.where(left, x2, b)
        probe = np.where(left, b - _INV_PHI * (b - a), a + _INV_PHI * (b - a))
        fp = expected_sharpness(coeffs, p, probe, harmonic)
        x1, x2 = np.where(left, probe, x2), np.where(left, x1, probe)
        f1, f2 = np.where(left, fp, f2), np.where(left, f1, fp)
    mid = 0.5 * (a + b)
    g_mid = expected_sharpness(coeffs, p, mid, harmonic)
    g_grid = g[np.arange(B), best]
    theta = np.where(g_mid >= g_grid, mid, grid[best]) % TWO_PI
    theta = np.where(flat, 0.0, theta)
    return theta, flat


def locally_optimal_theta(post: PhasePosterior, p: int, harmonic: Optional[int] = None) -> float:
    """Auxiliary phase maximising the expected post-shot sharpness.

    The sharpness is taken on harmonic ``p`` by default, i.e. on the phase
    multiple the shot resolves; for ``p = 1`` this is the ordinary circular
    sharpness.  A flat objective (e.g. a uniform prior) returns 0.
    """
    if p < 1:
        raise ValueError("pass count must be >= 1")
    theta, _ = locally_optimal_theta_rows(post.coeffs[None, :], p, harmonic)
    return float(theta[0])


# -- lockstep execution ---------------------------------------------------------

class LockstepRuns:
    """``B`` independent runs of one schedule advanced shot by shot."""

    def __init__(self, schedule: ProtocolSchedule, theta_init):
        self.schedule = schedule
        self.theta_init = np.atleast_1d(np.asarray(theta_init, dtype=float)) % TWO_PI
        B = self.theta_init.size
        self.coeffs = np.zeros((B, schedule.N + 1), dtype=complex)
        self.coeffs[:, 0] = 1.0
        self.H = 0
        self.theta_current = self.theta_init.copy()
        self.step = 0
        self._pending = None

    @property
    def done(self) -> bool:
        return self.step >= len(self.schedule.plan)

    @property
    def current(self) -> Optional[PlannedShot]:
        return None if self.done else self.schedule.plan[self.step]

    def next_thetas(self) -> np.ndarray:
        """Auxiliary phases for the upcoming shot, one per row."""
        shot = self.current
        if shot is None:
            raise IncompleteRunError("run is complete; no further settings")
        if shot.rule == _SWEEP:
            theta = self.theta_init + shot.offset
        elif shot.rule == _SCALED:
            theta = shot.p * self.theta_init + shot.offset
        elif shot.rule == _REGISTER:
            theta = shot.p * self.theta_current
        else:
            theta, flat = locally_optimal_theta_rows(self.coeffs[:, : self.H + 1], shot.p)
            theta = np.where(flat, shot.p * self.theta_init, theta)
        theta = np.mod(theta, TWO_PI)
        self._pending = theta
        return theta

    def absorb(self, outcomes) -> None:
        shot = self.current
        if shot is None or self._pending is None:
            raise OutOfOrderShotError("no setting is awaiting a result")
        u = np.asarray(outcomes)
        self.coeffs = update_rows(self.coeffs, self.H, shot.p, self._pending, u)
        self.H += shot.p
        if shot.rule == _REGISTER:
            self.theta_current = np.mod(self.theta_current + u * (math.pi / shot.p), TWO_PI)
        self.step += 1
        self._pending = None

    def estimates(self) -> np.ndarray:
        if not self.done:
            raise IncompleteRunError("resource budget not yet exhausted")
        if self.schedule.kind is Kind.QPEA:
            return np.mod(self.theta_current, TWO_PI)
        return circular_mean_rows(self.coeffs)


@dataclass
class ProtocolRun:
    """A single trial of a protocol, stepped by hand."""

    schedule: ProtocolSchedule
    theta_init: float = 0.0
    shots: List[Shot] = field(default_factory=list)

    def __post_init__(self):
        self._engine = LockstepRuns(self.schedule, [self.theta_init])
        self._issued: Optional[MeasurementSetting] = None

    @property
    def posterior(self) -> PhasePosterior:
        return PhasePosterior(self._engine.coeffs[0, : self._engine.H + 1])

    @property
    def theta_current(self) -> float:
        return float(self._engine.theta_current[0])

    @property
    def level_cursor(self) -> Optional[Tuple[int, int]]:
        cur = self._engine.current
        return None if cur is None else (cur.level, cur.index)

    @property
    def done(self) -> bool:
        return self._engine.done


def start_run(schedule: ProtocolSchedule, theta_init: float = 0.0) -> ProtocolRun:
    return ProtocolRun(schedule, theta_init)


def next_setting(run: ProtocolRun) -> Optional[MeasurementSetting]:
    """Setting for the next shot, or ``DONE`` (None) once the budget is spent."""
    if run.done:
        return DONE
    if run._issued is None:
        theta = run._engine.next_thetas()[0]
        run._issued = MeasurementSetting(run._engine.current.p, theta)
    return run._issued


def absorb_result(run: ProtocolRun, shot: Shot) -> ProtocolRun:
    issued = run._issued
    if issued is None or shot.setting != issued:
        raise OutOfOrderShotError(f"shot {shot!r} does not match issued setting {issued!r}")
    run._engine.absorb([shot.outcome])
    run.shots.append(shot)
    run._issued = None
    return run


def finalize(run: ProtocolRun) -> float:
    """Phase estimate: register readout for QPEA, ``arg(c_1)`` otherwise."""
    if not run.done:
        raise IncompleteRunError("resource budget not yet exhausted")
    est = float(run._engine.estimates()[0])
    if math.isnan(est):
        raise UndefinedEstimateError("first moment vanishes; circular mean undefined")
    return est
