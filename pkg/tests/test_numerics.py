"""Tests de subflujos aleatorios y de la cuadratura."""

import math

import numpy as np
import pytest

from riskx.errors import NumericalError
from riskx.quadrature import integrate
from riskx.streams import CHECK_STREAM, GEOMETRY_STREAM, SIMULATION_STREAM, substream


def test_substream_depends_only_on_its_key():
    first = substream(7, 3).random(5)
    second = substream(7, 3, SIMULATION_STREAM).random(5)
    np.testing.assert_array_equal(first, second)


@pytest.mark.parametrize("other", [(8, 3, 0), (7, 4, 0), (7, 3, GEOMETRY_STREAM), (7, 3, CHECK_STREAM)])
def test_substreams_are_distinct(other):
    base = substream(7, 3, SIMULATION_STREAM).random(5)
    assert not np.array_equal(base, substream(*other).random(5))


def test_substream_rejects_negative_values():
    with pytest.raises(ValueError):
        substream(-1, 0)


def test_integrate_smooth_function():
    assert integrate(np.sin, 0.0, math.pi) == pytest.approx(2.0, rel=1e-12)


def test_integrate_gaussian_mass():
    value = integrate(lambda x: np.exp(-0.5 * x ** 2) / math.sqrt(2 * math.pi), -12.0, 12.0)
    assert value == pytest.approx(1.0, rel=1e-12)


def test_integrate_reports_non_convergence():
    with pytest.raises(NumericalError) as info:
        integrate(lambda x: np.sign(x - 0.3), 0.0, 1.0, max_refinements=3)
    assert len(info.value.diagnostics["history"]) == 4


def test_integrate_rejects_non_finite_integrand():
    with pytest.raises(NumericalError):
        integrate(lambda x: np.full_like(x, np.inf), 0.0, 1.0)


def test_integrate_rejects_empty_interval():
    with pytest.raises(ValueError):
        integrate(np.sin, 1.0, 1.0)
