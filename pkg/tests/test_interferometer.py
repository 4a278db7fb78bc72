import math

import numpy as np
import pytest

from adaptphase.interferometer import (
    MeasurementSetting,
    Shot,
    likelihood,
    sample_outcome,
    trial_rng,
)

HADAMARD = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


def circuit_prob_zero(phi, theta, p):
    """State-vector run of H, R(theta), controlled-U^p, H on |0>, read in Z."""
    state = HADAMARD @ np.array([1, 0], dtype=complex)
    state = np.diag([np.exp(1j * theta), 1]) @ state
    # the eigenstate register only kicks back exp(i p phi) on the control's |1>
    state = np.diag([1, np.exp(1j * p * phi)]) @ state
    state = HADAMARD @ state
    return abs(state[0]) ** 2


def test_state_vector_convention():
    rng = np.random.default_rng(0)
    for _ in range(100):
        phi, theta = rng.uniform(0, 2 * math.pi, 2)
        p = int(rng.integers(1, 33))
        s = MeasurementSetting(p, theta)
        assert likelihood(0, phi, s) == pytest.approx(circuit_prob_zero(phi, s.theta, p), abs=1e-12)


@pytest.mark.parametrize(
    "u, phi, p, theta, expected",
    [
        (0, 0.7, 1, 0.7, 1.0),
        (1, 0.7, 1, 0.7, 0.0),
        (0, math.pi / 2, 2, math.pi / 2, 0.5),
    ],
)
def test_examples(u, phi, p, theta, expected):
    assert likelihood(u, phi, MeasurementSetting(p, theta)) == pytest.approx(expected, abs=1e-15)


def test_completeness_periodicity_covariance():
    rng = np.random.default_rng(1)
    for _ in range(200):
        phi, theta, delta = rng.uniform(-5, 5, 3)
        p = int(rng.integers(1, 17))
        s = MeasurementSetting(p, theta)
        assert likelihood(0, phi, s) + likelihood(1, phi, s) == pytest.approx(1.0, abs=1e-15)
        k = int(rng.integers(-5, 6))
        assert likelihood(0, phi + 2 * math.pi * k / p, s) == pytest.approx(likelihood(0, phi, s), abs=1e-12)
        moved = MeasurementSetting(p, theta + p * delta)
        assert likelihood(1, phi + delta, moved) == pytest.approx(likelihood(1, phi, s), abs=1e-12)


def test_setting_validation():
    with pytest.raises(ValueError):
        MeasurementSetting(0, 0.0)
    with pytest.raises(ValueError):
        Shot(MeasurementSetting(1, 0.0), 2)
    assert MeasurementSetting(1, 7.0).theta == pytest.approx(7.0 - 2 * math.pi)


def test_certain_outcomes():
    rng = np.random.default_rng(5)
    s = MeasurementSetting(1, 0.4)
    assert all(sample_outcome(0.4, s, rng) == 0 for _ in range(200))
    assert all(sample_outcome(0.4 + math.pi, s, rng) == 1 for _ in range(200))


def test_sampling_frequency():
    rng = np.random.default_rng(9)
    s = MeasurementSetting(1, 0.0)
    n = 10**5
    zeros = sum(sample_outcome(math.pi / 3, s, rng) == 0 for _ in range(n))
    sigma = math.sqrt(0.75 * 0.25 / n)
    assert abs(zeros / n - 0.75) < 3 * sigma


def test_trial_streams_reproducible_and_distinct():
    a = trial_rng(3, 10).random(4)
    assert np.array_equal(a, trial_rng(3, 10).random(4))
    assert not np.array_equal(a, trial_rng(3, 11).random(4))
    assert not np.array_equal(a, trial_rng(4, 10).random(4))
