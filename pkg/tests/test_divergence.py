"""Tests de las α-divergencias exactas."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from riskx.divergence import (
    AlphaDivergenceRequest,
    alpha_divergence,
    alpha_divergence_mixture,
    alpha_divergence_multinomial,
    alpha_divergence_normal,
)
from riskx.errors import DivergenceUndefinedError, InvalidInputError
from riskx.geometry import fisher_matrix
from riskx.models import MultinomialModel, ParamPoint, TwoNormalMixtureModel, ZeroMeanNormalModel
from riskx.quadrature import integrate

ALPHAS = [-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]

probabilities = st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=2, max_size=4).map(
    lambda w: np.array(w) / np.sum(w)
)


# Multinomial


@pytest.mark.parametrize("alpha", ALPHAS)
def test_multinomial_zero_at_equality(alpha):
    m = np.array([0.2, 0.3, 0.5])
    assert alpha_divergence_multinomial(m, m, alpha) == pytest.approx(0.0, abs=1e-15)


def test_multinomial_kl_example():
    value = alpha_divergence_multinomial([0.5, 0.5], [0.25, 0.75], -1.0)
    assert value == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), rel=1e-12)
    assert value == pytest.approx(0.143841, abs=1e-6)


def test_multinomial_reverse_kl_with_empty_cell_is_infinite():
    assert alpha_divergence_multinomial([0.0, 1.0], [0.5, 0.5], 1.0) == math.inf


def test_multinomial_chi2_example():
    assert alpha_divergence_multinomial([0.0, 1.0], [0.5, 0.5], -3.0) == pytest.approx(0.5)


def test_multinomial_requires_interior_truth():
    with pytest.raises(InvalidInputError):
        alpha_divergence_multinomial([0.5, 0.5], [0.0, 1.0], -1.0)
    with pytest.raises(InvalidInputError):
        alpha_divergence_multinomial([0.7, 0.7], [0.5, 0.5], -1.0)


@settings(max_examples=50, deadline=None)
@given(probabilities, st.floats(min_value=-5.0, max_value=5.0))
def test_multinomial_nonnegative(m, alpha):
    m_hat = np.roll(m, 1)
    assert alpha_divergence_multinomial(m_hat, m, alpha) >= 0.0


@settings(max_examples=50, deadline=None)
@given(probabilities, st.floats(min_value=-5.0, max_value=5.0))
def test_multinomial_duality(m, alpha):
    other = np.sqrt(m) / np.sum(np.sqrt(m))
    forward = alpha_divergence_multinomial(m, other, alpha)
    backward = alpha_divergence_multinomial(other, m, -alpha)
    assert forward == pytest.approx(backward, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("edge", [-1.0, 1.0])
def test_multinomial_alpha_continuity(edge):
    m_hat, m = [0.2, 0.5, 0.3], [0.3, 0.3, 0.4]
    near = edge - math.copysign(1e-6, edge)
    assert alpha_divergence_multinomial(m_hat, m, near) == pytest.approx(
        alpha_divergence_multinomial(m_hat, m, edge), rel=1e-4
    )


# Normal


def test_normal_stein_example():
    value = alpha_divergence_normal([[2.0]], [[1.0]], -1.0)
    assert value == pytest.approx(0.5 * (2 - math.log(2) - 1), rel=1e-12)
    assert value == pytest.approx(0.153426, abs=1e-6)


def test_normal_hellinger_example_matches_quadrature():
    value = alpha_divergence_normal([[2.0]], [[1.0]], 0.0)
    assert value == pytest.approx(4 * (1 - 2 ** 0.25 / math.sqrt(1.5)), rel=1e-12)
    assert value == pytest.approx(0.116066, abs=1e-6)

    def affinity(x):
        f_hat = np.exp(-x ** 2 / 4) / math.sqrt(4 * math.pi)
        f = np.exp(-x ** 2 / 2) / math.sqrt(2 * math.pi)
        return np.sqrt(f_hat * f)

    quadrature = 4 * (1 - integrate(affinity, -40.0, 40.0))
    assert value == pytest.approx(quadrature, abs=1e-8)


@pytest.mark.parametrize("alpha", [-1.0, -0.3, 0.0, 0.7, 1.0])
def test_normal_zero_at_equality(alpha):
    sigma = np.array([[2.0, 0.4], [0.4, 1.0]])
    assert alpha_divergence_normal(sigma, sigma, alpha) == pytest.approx(0.0, abs=1e-14)


def test_normal_undefined_for_extreme_alpha():
    with pytest.raises(DivergenceUndefinedError) as info:
        alpha_divergence_normal([[10.0]], [[1.0]], -3.0)
    assert info.value.eigenvalue < 0


def test_normal_rejects_non_spd():
    with pytest.raises(InvalidInputError):
        alpha_divergence_normal([[1.0, 2.0], [2.0, 1.0]], np.eye(2), -1.0)


def _spd(entries):
    a = np.array(entries).reshape(2, 2)
    return a @ a.T + 0.3 * np.eye(2)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(min_value=-2, max_value=2), min_size=4, max_size=4),
    st.lists(st.floats(min_value=-2, max_value=2), min_size=4, max_size=4),
    st.floats(min_value=-1.0, max_value=1.0),
)
def test_normal_duality_and_nonnegativity(first, second, alpha):
    a, b = _spd(first), _spd(second)
    forward = alpha_divergence_normal(a, b, alpha)
    backward = alpha_divergence_normal(b, a, -alpha)
    assert forward >= 0.0
    assert forward == pytest.approx(backward, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("edge", [-1.0, 1.0])
def test_normal_alpha_continuity(edge):
    a = np.array([[2.0, 0.3], [0.3, 0.7]])
    near = edge - math.copysign(1e-6, edge)
    assert alpha_divergence_normal(a, np.eye(2), near) == pytest.approx(
        alpha_divergence_normal(a, np.eye(2), edge), rel=1e-4
    )


# Mezcla


def test_mixture_zero_at_equality():
    assert alpha_divergence_mixture(0.4, 0.4, 0.5, 0.0) == 0.0


def test_mixture_kl_matches_monte_carlo():
    family = TwoNormalMixtureModel(0.5)
    estimate, truth = ParamPoint((0.4,)), ParamPoint((0.5,))
    x = family.sample(estimate, 400_000, 23)
    log_ratio = family.log_density(x, estimate) - family.log_density(x, truth)
    se = log_ratio.std(ddof=1) / math.sqrt(x.size)
    value = alpha_divergence_mixture(0.4, 0.5, 0.5, -1.0)
    assert value > 0
    assert abs(value - log_ratio.mean()) <= 4 * se


@settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=0.95),
    st.floats(min_value=0.05, max_value=0.95),
    st.floats(min_value=0.1, max_value=2.0),
    st.floats(min_value=-3.0, max_value=3.0),
)
def test_mixture_duality(first, second, sigma2, alpha):
    assume(abs(first - second) > 0.02)
    forward = alpha_divergence_mixture(first, second, sigma2, alpha)
    backward = alpha_divergence_mixture(second, first, sigma2, -alpha)
    assert forward > 0.0
    assert forward == pytest.approx(backward, rel=1e-7)


def test_mixture_rejects_out_of_range():
    with pytest.raises(InvalidInputError):
        alpha_divergence_mixture(0.3, 1.0, 0.5, -1.0)
    with pytest.raises(InvalidInputError):
        alpha_divergence_mixture(1.2, 0.5, 0.5, -1.0)


# Todas las familias


def _perturbation_case(name, seed):
    rng = np.random.default_rng(seed)
    if name == "multinomial":
        p = int(rng.integers(1, 4))
        weights = rng.uniform(0.3, 1.0, size=p + 1)
        family, theta = MultinomialModel(p), ParamPoint(tuple((weights / weights.sum())[1:]))
    elif name == "normal":
        family = ZeroMeanNormalModel(int(rng.integers(1, 3)))
        a = rng.normal(size=(family.p, family.p))
        theta = family.point_from_matrix(a @ a.T + np.eye(family.p))
    else:
        family = TwoNormalMixtureModel(float(rng.uniform(0.2, 1.0)))
        theta = ParamPoint((float(rng.uniform(0.15, 0.85)),))
    direction = rng.normal(size=family.param_dim)
    return family, theta, direction / np.linalg.norm(direction)


@pytest.mark.parametrize("name", ["multinomial", "normal", "mixture"])
@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.floats(min_value=-3.0, max_value=3.0))
def test_small_perturbation_is_quadratic(name, seed, alpha):
    family, theta, direction = _perturbation_case(name, seed)
    eps = 1e-4
    moved = ParamPoint(tuple(theta.vector + eps * direction))
    value = alpha_divergence(family, moved, theta, alpha)
    g = fisher_matrix(family, theta).g
    assert value / eps ** 2 == pytest.approx(0.5 * direction @ g @ direction, rel=1e-2)


def test_request_dispatches_by_family():
    request = AlphaDivergenceRequest(MultinomialModel(1), ParamPoint((0.5,)), ParamPoint((0.25,)), -1.0)
    assert request.evaluate() == pytest.approx(
        alpha_divergence_multinomial([0.5, 0.5], [0.75, 0.25], -1.0)
    )


def test_dispatch_requires_interior_truth():
    with pytest.raises(InvalidInputError):
        alpha_divergence(MultinomialModel(1), ParamPoint((0.5,)), ParamPoint((1.0,)), -1.0)
