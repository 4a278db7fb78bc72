"""Monte Carlo harness: batches of protocol trials and scaling fits."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .interferometer import outcome_from_uniform, prob_zero, trial_rng
from .policies import LockstepRuns, ProtocolSchedule
from .posterior import DegenerateLikelihoodError, holevo_variance_of_samples, wrap_angle

__all__ = [
    "TrialBatch",
    "ScalingFit",
    "SweepResult",
    "BatchError",
    "run_batch",
    "fit_scaling",
    "sweep",
    "derive_seed",
    "default_workers",
]

TWO_PI = 2.0 * math.pi

CHUNK = 256
BOOTSTRAP_RESAMPLES = 2000
THREADS_ENV = "ADAPTPHASE_THREADS"


class BatchError(RuntimeError):
    """A protocol error inside one trial; carries the trial index."""

    def __init__(self, trial_index: int, cause: Exception):
        super().__init__(f"trial {trial_index}: {cause}")
        self.trial_index = trial_index
        self.cause = cause


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def derive_seed(seed: int, index: int) -> int:
    """Child seed for the ``index``-th size of a sweep."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class TrialBatch:
    schedule: ProtocolSchedule
    trials: int
    seed: int
    errors: np.ndarray
    holevo_variance: float
    ci_low: float
    ci_high: float

    @property
    def N(self) -> int:
        return self.schedule.N

    @property
    def divergent(self) -> bool:
        return math.isinf(self.holevo_variance)

    @property
    def sqrt_V(self) -> float:
        return math.sqrt(self.holevo_variance)


def _trial_draws(seed: int, index: int, n_shots: int):
    rng = trial_rng(seed, index)
    phi = rng.uniform(0.0, TWO_PI)
    theta_init = rng.uniform(0.0, TWO_PI)
    return phi, theta_init, rng.random(n_shots)


def _run_chunk(schedule: ProtocolSchedule, seed: int, start: int, stop: int, phi_fixed):
    plan = schedule.plan
    draws = [_trial_draws(seed, i, len(plan)) for i in range(start, stop)]
    phi = np.array([d[0] for d in draws])
    if phi_fixed is not None:
        phi = np.full(phi.shape, float(phi_fixed))
    theta_init = np.array([d[1] for d in draws])
    uniforms = np.array([d[2] for d in draws]).reshape(stop - start, len(plan))

    runs = LockstepRuns(schedule, theta_init)
    try:
        for step, shot in enumerate(plan):
            theta = runs.next_thetas()
            u = outcome_from_uniform(prob_zero(phi, shot.p, theta), uniforms[:, step])
            runs.absorb(u)
    except DegenerateLikelihoodError as exc:
        row = _row_from_message(exc)
        raise BatchError(start + row, exc) from exc
    est = runs.estimates()
    bad = np.flatnonzero(np.isnan(est))
    if bad.size:
        raise BatchError(start + int(bad[0]), ValueError("undefined estimate: first moment vanishes"))
    return wrap_angle(est - phi)


def _row_from_message(exc: Exception) -> int:
    msg = str(exc)
    if "(row " in msg:
        return int(msg.split("(row ")[1].rstrip(")"))
    return 0


def _holevo_along(x, axis=-1):
    s = np.abs(np.mean(np.exp(1j * x), axis=axis))
    with np.errstate(divide="ignore"):
        return np.where(s < 1e-12, np.inf, s ** -2.0 - 1.0)


def bootstrap_ci(errors: np.ndarray, seed: int, resamples: int = BOOTSTRAP_RESAMPLES):
    """Percentile bootstrap 95% interval for the Holevo variance."""
    if errors.size < 2:
        v = holevo_variance_of_samples(errors)
        return v, v
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB0075]))
    res = stats.bootstrap(
        (errors,),
        _holevo_along,
        n_resamples=resamples,
        method="percentile",
        confidence_level=0.95,
        vectorized=True,
        batch=max(1, min(resamples, 20_000_000 // errors.size)),
        random_state=rng,
    )
    return float(res.confidence_interval.low), float(res.confidence_interval.high)


def run_batch(
    schedule: ProtocolSchedule,
    trials: int,
    seed: int,
    phi: Optional[float] = None,
    workers: Optional[int] = None,
    bootstrap: bool = True,
) -> TrialBatch:
    """Run ``trials`` independent estimations of a random phase.

    Trial ``i`` draws its true phase, ``theta_init`` and all outcome
    uniforms from a stream keyed by ``(seed, i)``; passing ``phi`` pins the
    true phase instead.  Trials run in fixed-size chunks so the result is
    bit-identical for any ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    workers = default_workers() if workers is None else max(1, workers)
    bounds = [(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]
    if workers == 1 or len(bounds) == 1:
        parts = [_run_chunk(schedule, seed, a, b, phi) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: _run_chunk(schedule, seed, ab[0], ab[1], phi), bounds))
    errors = np.concatenate(parts)
    V = holevo_variance_of_samples(errors)
    if bootstrap and not math.isinf(V):
        lo, hi = bootstrap_ci(errors, seed)
    else:
        lo, hi = V, V
    return TrialBatch(schedule, trials, seed, errors, V, lo, hi)


@dataclass(frozen=True)
class ScalingFit:
    """Power-law fit of Holevo variance against resources.

    ``exponent``/``intercept`` come from a free least-squares line in
    log-log space; ``constant`` is ``C`` in ``V = (C/N)**2`` with the slope
    pinned at -2.
    """

    N: np.ndarray
    V: np.ndarray
    exponent: float
    intercept: float
    constant: float
    residuals: np.ndarray

    def predict(self, N):
        return np.exp(self.intercept) * np.asarray(N, dtype=float) ** self.exponent


def fit_scaling(points: Iterable[Tuple[float, float]]) -> ScalingFit:
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ValueError("need at least three (N, V) points")
    N = np.array([p[0] for p in pts])
    V = np.array([p[1] for p in pts])
    if len(set(N)) != N.size:
        raise ValueError("N values must be distinct")
    if np.any(N <= 0) or np.any(~np.isfinite(V)) or np.any(V <= 0):
        raise ValueError("N and V must be positive and finite")
    x, y = np.log(N), np.log(V)
    slope, intercept = np.polyfit(x, y, 1)
    fixed = float(np.mean(y + 2.0 * x))
    return ScalingFit(
        N=N,
        V=V,
        exponent=float(slope),
        intercept=float(intercept),
        constant=math.exp(fixed / 2.0),
        residuals=y - (slope * x + intercept),
    )


@dataclass
class SweepResult:
    batches: List[TrialBatch]
    fit: Optional[ScalingFit]


def sweep(
    family: Callable[[int], ProtocolSchedule] | Sequence[ProtocolSchedule],
    sizes: Optional[Iterable[int]] = None,
    trials: int = 1000,
    seed: int = 0,
    workers: Optional[int] = None,
    bootstrap: bool = True,
) -> SweepResult:
    """Batches across sizes, each with its own derived seed, plus a fit.

    ``family`` is either a callable mapping a size parameter (``K`` or
    ``N``) to a schedule, used with ``sizes``, or a sequence of schedules.
    """
    if callable(family):
        if sizes is None:
            raise ValueError("sizes are required with a schedule factory")
        schedules = [family(s) for s in sizes]
    else:
        schedules = list(family)
    batches = [
        run_batch(sch, trials, derive_seed(seed, i), workers=workers, bootstrap=bootstrap)
        for i, sch in enumerate(schedules)
    ]
    finite = [(b.N, b.holevo_variance) for b in batches if not b.divergent]
    fit = fit_scaling(finite) if len(finite) >= 3 else None
    return SweepResult(batches, fit)
