import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptphase.posterior import (
    DIVERGENT,
    DegenerateLikelihoodError,
    PhasePosterior,
    UndefinedEstimateError,
    bayes_update,
    circular_mean,
    grid_bayes_oracle,
    holevo_variance_of_posterior,
    holevo_variance_of_samples,
    uniform_prior,
    update_rows,
    wrap_angle,
)

TWO_PI = 2 * math.pi


def iterate(shots, prior=None):
    post = prior or uniform_prior()
    for p, theta, u in shots:
        post = bayes_update(post, p, theta, u)
    return post


shot = st.tuples(
    st.sampled_from([1, 2, 4, 8]),
    st.floats(0, TWO_PI, allow_nan=False),
    st.integers(0, 1),
)


def test_uniform_prior():
    post = uniform_prior()
    assert post.coeffs.tolist() == [1]
    assert post.max_harmonic == 0
    assert post.density(1.3) == pytest.approx(1 / TWO_PI)
    assert holevo_variance_of_posterior(post) == DIVERGENT


def test_single_update_matches_analytic_integral():
    post = bayes_update(uniform_prior(), 1, 0.0, 0)
    oracle = grid_bayes_oracle([(1, 0.0, 0)], 4096)
    assert post.coeffs[1] == pytest.approx(0.5, abs=1e-15)
    assert oracle.coeffs[1] == pytest.approx(0.5, abs=1e-10)
    assert post.max_harmonic == 1


def test_two_pass_update():
    post = bayes_update(uniform_prior(), 2, 0.0, 1)
    assert post.coeffs[1] == pytest.approx(0.0, abs=1e-15)
    assert post.coeffs[2] == pytest.approx(-0.5, abs=1e-15)
    np.testing.assert_allclose(post.coeffs, grid_bayes_oracle([(2, 0.0, 1)]).coeffs, atol=1e-10)


def test_successive_updates_match_oracle():
    shots = [(1, 0.0, 0), (1, math.pi, 0)]
    np.testing.assert_allclose(iterate(shots).coeffs, grid_bayes_oracle(shots).coeffs, atol=1e-8)


def test_oracle_empty_is_uniform():
    assert grid_bayes_oracle([], 64).coeffs.tolist() == [1]


def test_oracle_grid_precondition():
    with pytest.raises(ValueError):
        grid_bayes_oracle([(8, 0.0, 0)], 64)


def test_random_sequences_match_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        shots = [(int(rng.choice([1, 2, 3, 4])), rng.uniform(0, TWO_PI), int(rng.integers(2)))
                 for _ in range(10)]
        np.testing.assert_allclose(iterate(shots).coeffs, grid_bayes_oracle(shots).coeffs, atol=1e-8)


def test_degenerate_outcome_raises():
    # c_1 = 1 puts all weight where cos(phi) = 1, so u=1 at theta=0 is impossible
    point = PhasePosterior([1.0, 1.0])
    with pytest.raises(DegenerateLikelihoodError):
        bayes_update(point, 1, 0.0, 1)


@pytest.mark.parametrize("p, u", [(0, 0), (1, 2)])
def test_bad_arguments(p, u):
    with pytest.raises(ValueError):
        bayes_update(uniform_prior(), p, 0.0, u)


def test_update_rows_requires_room():
    with pytest.raises(ValueError):
        update_rows(np.ones((1, 2), dtype=complex), 1, 1, 0.0, 0)


class TestCircularMean:
    def test_real_positive(self):
        assert circular_mean(PhasePosterior([1, 0.5])) == 0.0

    def test_definition(self):
        post = PhasePosterior([1, 0.3 * np.exp(2j)])
        assert circular_mean(post) == pytest.approx(2.0)

    @pytest.mark.parametrize("delta", [0.4, 3.0, -1.2, 7.5])
    def test_shift_equivariance(self, delta):
        post = iterate([(1, 0.3, 0), (2, 1.1, 1), (1, 2.0, 0)])
        shifted = post.shifted(delta)
        diff = wrap_angle(circular_mean(shifted) - circular_mean(post) - delta)
        assert abs(diff) < 1e-12

    def test_undefined(self):
        with pytest.raises(UndefinedEstimateError):
            circular_mean(uniform_prior())
        with pytest.raises(UndefinedEstimateError):
            circular_mean(PhasePosterior([1, 0, 0.2]))


class TestHolevo:
    def test_point_mass(self):
        assert holevo_variance_of_posterior(PhasePosterior([1, 1])) == 0.0

    def test_half(self):
        assert holevo_variance_of_posterior(PhasePosterior([1, 0.5])) == pytest.approx(3.0)

    def test_constant_samples(self):
        assert holevo_variance_of_samples([0.7] * 5) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("a", [0.1, 0.5, 1.2])
    def test_symmetric_pair(self, a):
        assert holevo_variance_of_samples([a, -a]) == pytest.approx(math.tan(a) ** 2)

    def test_wrapped_gaussian_matches_ordinary_variance(self):
        rng = np.random.default_rng(0)
        sigma = 0.01
        x = wrap_angle(rng.normal(0.0, sigma, 10**6))
        assert holevo_variance_of_samples(x) == pytest.approx(sigma ** 2, rel=0.05)

    def test_divergent_samples(self):
        assert holevo_variance_of_samples([0.0, math.pi]) == DIVERGENT

    def test_empty(self):
        with pytest.raises(ValueError):
            holevo_variance_of_samples([])


def test_wrap_angle_range():
    x = np.array([-math.pi, math.pi, 3 * math.pi, 0.1, -7.0])
    w = wrap_angle(x)
    assert np.all(w > -math.pi) and np.all(w <= math.pi)
    np.testing.assert_allclose(np.exp(1j * w), np.exp(1j * x), atol=1e-12)


# -- properties ----------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.lists(shot, max_size=20))
def test_oracle_equivalence_and_normalisation(shots):
    post = iterate(shots)
    assert post.coeffs[0] == 1.0
    assert np.all(np.abs(post.coeffs) <= 1 + 1e-12)
    np.testing.assert_allclose(post.coeffs, grid_bayes_oracle(shots, 4096).coeffs, atol=1e-8)
    grid = np.linspace(0, TWO_PI, 4096, endpoint=False)
    assert post.density(grid).min() >= -1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(shot, min_size=1, max_size=12))
def test_harmonic_budget(shots):
    total = sum(p for p, _, _ in shots)
    width = total + 20
    c = np.zeros((1, width), dtype=complex)
    c[0, 0] = 1
    H = 0
    for p, theta, u in shots:
        c = update_rows(c, H, p, theta, u)
        H += p
    assert np.all(c[0, total + 1 :] == 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(shot, max_size=8), shot)
def test_mixture_identity(prefix, nxt):
    prior = iterate(prefix)
    p, theta, _ = nxt
    # outcome probabilities by brute-force quadrature of the prior density
    grid = np.arange(8192) * (TWO_PI / 8192)
    dens = prior.density(grid)
    mix = np.zeros(prior.max_harmonic + p + 1, dtype=complex)
    for u in (0, 1):
        like = 0.5 * (1 + (-1) ** u * np.cos(p * grid - theta))
        prob = np.mean(dens * like) * TWO_PI
        post = bayes_update(prior, p, theta, u)
        mix += prob * post.coeffs
    expect = np.zeros_like(mix)
    expect[: prior.coeffs.size] = prior.coeffs
    np.testing.assert_allclose(mix, expect, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(shot, min_size=1, max_size=12), st.floats(-10, 10))
def test_joint_shift(shots, delta):
    post = iterate(shots)
    moved = iterate([(p, theta + p * delta, u) for p, theta, u in shots])
    np.testing.assert_allclose(moved.coeffs, post.shifted(delta).coeffs, atol=1e-12)
    v0, v1 = holevo_variance_of_posterior(post), holevo_variance_of_posterior(moved)
    if math.isfinite(v0):
        assert v1 == pytest.approx(v0, abs=1e-12, rel=1e-12)
        if abs(post.coeffs[1]) > 1e-6:
            d = wrap_angle(circular_mean(moved) - circular_mean(post) - delta)
            assert abs(d) < 1e-12
