"""Tests de las familias paramétricas y sus MLE."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riskx.errors import DegenerateEstimateError, InvalidInputError
from riskx.models import (
    CategoricalNaturalModel,
    MultinomialModel,
    ParamPoint,
    TwoNormalMixtureModel,
    ZeroMeanNormalModel,
    golden_section_max_search,
    mixture_identity_residual,
    mixture_log_likelihood,
    multinomial_mle,
    normal_cov_mle,
)


def _families():
    normal = ZeroMeanNormalModel(2)
    return [
        (MultinomialModel(2), ParamPoint((0.2, 0.3))),
        (normal, normal.point_from_matrix(np.array([[2.0, 0.3], [0.3, 1.0]]))),
        (TwoNormalMixtureModel(0.5), ParamPoint((0.3,))),
        (CategoricalNaturalModel(2), CategoricalNaturalModel(2).natural_point([0.2, 0.3])),
    ]


# ParamPoint


def test_param_point_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        ParamPoint((0.1, math.nan))
    with pytest.raises(InvalidInputError):
        ParamPoint(())


def test_point_checks_dimension():
    with pytest.raises(InvalidInputError):
        MultinomialModel(2).point([0.3])


# MLE


@pytest.mark.parametrize("counts, expected, boundary", [
    ((3, 7), (0.7,), False),
    ((10, 0), (0.0,), True),
    ((2, 3, 5), (0.3, 0.5), False),
])
def test_multinomial_mle_examples(counts, expected, boundary):
    estimate = multinomial_mle(counts)
    assert estimate.coords == pytest.approx(expected)
    assert estimate.boundary is boundary


@pytest.mark.parametrize("counts", [(0, 0), (-1, 3), (5,)])
def test_multinomial_mle_rejects_invalid_counts(counts):
    with pytest.raises(InvalidInputError):
        multinomial_mle(counts)


@pytest.mark.parametrize("samples, expected", [
    ([[1.0], [-1.0]], (1.0,)),
    ([[2.0], [0.0]], (2.0,)),
    ([[1.0, 0.0], [0.0, 1.0]], (0.5, 0.0, 0.5)),
])
def test_normal_cov_mle_examples(samples, expected):
    assert normal_cov_mle(np.array(samples)).coords == pytest.approx(expected)


def test_normal_cov_mle_degenerate():
    with pytest.raises(DegenerateEstimateError):
        normal_cov_mle(np.array([[1.0, 2.0]]))
    with pytest.raises(DegenerateEstimateError):
        normal_cov_mle(np.array([[1.0, 1.0], [2.0, 2.0]]))
    with pytest.raises(InvalidInputError):
        normal_cov_mle(np.array([[1.0, math.inf], [0.0, 1.0]]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=40), min_size=2, max_size=5))
def test_multinomial_mle_is_stationary(counts):
    family = MultinomialModel(len(counts) - 1)
    x = np.repeat(np.arange(len(counts)), counts)
    estimate = family.mle(x)
    total = family.score(x, estimate).sum(axis=0)
    np.testing.assert_allclose(total, 0.0, atol=1e-9 * sum(counts) * len(counts))


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=3), st.integers(min_value=0, max_value=40),
       st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_normal_cov_mle_is_stationary(p, extra, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(p, p))
    chol = np.linalg.cholesky(a @ a.T + np.eye(p))
    samples = rng.normal(size=(p + 2 + extra, p)) @ chol.T
    family = ZeroMeanNormalModel(p)
    estimate = normal_cov_mle(samples)
    total = family.score(samples, estimate).sum(axis=0)
    scale = np.abs(family.score(samples, estimate)).sum(axis=0) + 1.0
    np.testing.assert_array_less(np.abs(total), 1e-9 * scale)


def test_mixture_mle_concentrated_sample():
    estimate = TwoNormalMixtureModel(0.1).mle(np.full(50, 1.0))
    assert estimate.coords[0] > 0.9


def test_mixture_mle_flat_likelihood():
    estimate = TwoNormalMixtureModel(0.5).mle(np.array([0.5]))
    assert estimate.flat
    assert estimate.coords == (0.5,)


def test_mixture_mle_symmetric_sample():
    estimate = TwoNormalMixtureModel(0.25).mle(np.array([0.0, 1.0]))
    assert estimate.coords[0] == pytest.approx(0.5, abs=1e-6)
    assert not estimate.boundary


def test_mixture_mle_matches_grid_search():
    family = TwoNormalMixtureModel(0.5)
    samples = family.sample(ParamPoint((0.35,)), 200, 11)
    grid = np.linspace(1e-4, 1 - 1e-4, 20001)
    values = [mixture_log_likelihood(samples, t, 0.5) for t in grid]
    best = grid[int(np.argmax(values))]
    assert family.mle(samples).coords[0] == pytest.approx(best, abs=1e-4)


def test_golden_section_finds_maximum():
    argmax = golden_section_max_search(lambda x: -(x - 0.3) ** 2, (0.0, 1.0), 1e-8)
    assert argmax == pytest.approx(0.3, abs=1e-7)


def test_natural_mle_requires_all_cells():
    family = CategoricalNaturalModel(2)
    with pytest.raises(DegenerateEstimateError):
        family.mle(np.array([0, 1, 1]))
    estimate = family.mle(np.array([0, 0, 1, 2, 2, 2]))
    assert estimate.coords == pytest.approx((math.log(0.5), math.log(1.5)))


# Derivadas del log


@pytest.mark.parametrize("index", range(4))
def test_log_derivs_are_symmetric(index):
    family, theta = _families()[index]
    x = family.sample(theta, 20, 3)
    for order in (2, 3, 4):
        values = family.log_derivs(x, theta, order)
        swapped = np.swapaxes(values, 1, order)
        np.testing.assert_allclose(values, swapped, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("index", range(4))
def test_log_derivs_match_finite_differences(index):
    family, theta = _families()[index]
    x = family.sample(theta, 10, 5)
    eps = 1e-6
    for order in (1, 2, 3):
        higher = family.log_derivs(x, theta, order + 1)
        for j in range(family.param_dim):
            shift = np.zeros(family.param_dim)
            shift[j] = eps
            up = family.log_derivs(x, ParamPoint(tuple(theta.vector + shift)), order)
            down = family.log_derivs(x, ParamPoint(tuple(theta.vector - shift)), order)
            numeric = (up - down) / (2 * eps)
            np.testing.assert_allclose(higher[..., j], numeric, rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("index", range(4))
def test_score_has_zero_mean(index):
    family, theta = _families()[index]
    score = family.score(family.sample(theta, 50_000, 17), theta)
    mean = score.mean(axis=0)
    se = score.std(axis=0, ddof=1) / math.sqrt(score.shape[0])
    assert np.all(np.abs(mean) <= 4 * se)


def test_log_derivs_reject_bad_order():
    family = MultinomialModel(1)
    with pytest.raises(InvalidInputError):
        family.log_derivs(np.array([0, 1]), ParamPoint((0.3,)), 5)


def test_multinomial_third_derivative_is_twice_cubed_score():
    family = MultinomialModel(1)
    theta = ParamPoint((0.3,))
    x = np.array([0, 1, 1, 0])
    l1 = family.log_derivs(x, theta, 1).ravel()
    l3 = family.log_derivs(x, theta, 3).ravel()
    np.testing.assert_allclose(l3, 2 * l1 ** 3)


def test_mixture_identities_hold_pointwise():
    family = TwoNormalMixtureModel(0.2)
    theta = ParamPoint((0.4,))
    x = np.linspace(-5.0, 6.0, 501)
    assert mixture_identity_residual(family, theta, x) < 1e-12


def test_mixture_ratio_is_finite_in_the_tails():
    family = TwoNormalMixtureModel(0.01)
    values = family.log_derivs(np.array([-200.0, 0.5, 200.0]), ParamPoint((0.5,)), 1)
    assert np.all(np.isfinite(values))


def test_natural_cumulants():
    family = CategoricalNaturalModel(2)
    m = np.array([0.2, 0.3])
    theta = family.natural_point(m)
    np.testing.assert_allclose(family.full(theta), [0.5, 0.2, 0.3])
    np.testing.assert_allclose(family.cumulant(theta, 2), np.diag(m) - np.outer(m, m), atol=1e-14)
    # Bernoulli: κ3 = m(1-m)(1-2m)
    one = CategoricalNaturalModel(1)
    kappa3 = one.cumulant(one.natural_point([0.3]), 3)
    assert kappa3.ravel()[0] == pytest.approx(0.3 * 0.7 * 0.4)


# Fisher y muestreo


def test_multinomial_fisher_examples():
    family = MultinomialModel(2)
    np.testing.assert_allclose(family.fisher(ParamPoint((1 / 3, 1 / 3))), [[6, 3], [3, 6]])
    assert MultinomialModel(1).fisher(ParamPoint((0.5,)))[0, 0] == pytest.approx(4.0)


def test_normal_fisher_one_dimensional():
    family = ZeroMeanNormalModel(1)
    assert family.fisher(ParamPoint((2.0,)))[0, 0] == pytest.approx(1 / 8)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(min_value=-2, max_value=2), min_size=4, max_size=4))
def test_normal_matrix_round_trip(entries):
    family = ZeroMeanNormalModel(2)
    a = np.array(entries).reshape(2, 2)
    sigma = a @ a.T + 0.5 * np.eye(2)
    theta = family.point_from_matrix(sigma)
    np.testing.assert_allclose(family.matrix(theta), sigma)
    assert family.domain_check(theta)


def test_normal_domain_rejects_indefinite():
    family = ZeroMeanNormalModel(2)
    assert not family.domain_check(ParamPoint((1.0, 2.0, 1.0)))
    with pytest.raises(InvalidInputError):
        family.require_interior(ParamPoint((1.0, 2.0, 1.0)))


def test_sampling_is_reproducible():
    family = MultinomialModel(2)
    theta = ParamPoint((0.2, 0.3))
    np.testing.assert_array_equal(family.sample(theta, 100, 42), family.sample(theta, 100, 42))


def test_normal_sample_covariance():
    family = ZeroMeanNormalModel(2)
    sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
    x = family.sample(family.point_from_matrix(sigma), 200_000, 9)
    np.testing.assert_allclose(x.T @ x / x.shape[0], sigma, atol=0.03)
