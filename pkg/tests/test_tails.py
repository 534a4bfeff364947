import math

import numpy as np
import pytest
from scipy import integrate, stats

from parmc.rng import Stream
from parmc.tails import (
    ExactExponential,
    FiniteMoment,
    FitError,
    Normal,
    RegularVarying,
    SubExponential,
    SubGaussian,
    UnsupportedModelError,
    bound_expected_max,
    empirical_max_quantile,
    evt_quantile,
    fit_tail_exponent,
)


def test_subexponential_bound_values():
    assert bound_expected_max(SubExponential(nu=1, mean=2), 1) == 3
    assert bound_expected_max(SubExponential(nu=1, mean=2), 100) == pytest.approx(7.6052, abs=5e-5)


def test_subgaussian_bound_value():
    assert bound_expected_max(SubGaussian(1.0), 100) == pytest.approx(3.8842, abs=5e-5)


def test_bound_dominates_exact_normal_max_mean():
    # E[max of n N(0,1)] by quadrature on the density n phi Phi^(n-1)
    for n in (2, 10, 100):
        mean, _ = integrate.quad(lambda x: x * n * stats.norm.pdf(x) * stats.norm.cdf(x) ** (n - 1), -12, 12)
        assert mean <= bound_expected_max(SubGaussian(1.0), n)


def test_bound_rejects_heavy_tails():
    with pytest.raises(UnsupportedModelError):
        bound_expected_max(FiniteMoment(3), 10)
    with pytest.raises(UnsupportedModelError):
        bound_expected_max(RegularVarying(1, 2), 10)
    with pytest.raises(ValueError):
        bound_expected_max(SubGaussian(1.0), 0)


def test_evt_closed_forms():
    assert evt_quantile(RegularVarying(1, 1), 100, math.exp(-1)) == pytest.approx(100)
    assert evt_quantile(ExactExponential(1), 100, 0.5) == pytest.approx(4.9717, abs=5e-5)
    assert evt_quantile(ExactExponential(2), 1, 0.5) == pytest.approx(0.18326, abs=5e-6)


def test_evt_exponential_is_exact_in_the_limit():
    # P[max <= x] = (1 - e^-x)^n -> exp(-n e^-x)
    n, q = 10**6, 0.3
    x = evt_quantile(ExactExponential(1), n, q)
    assert (1 - math.exp(-x)) ** n == pytest.approx(q, rel=1e-4)


def test_evt_normal_uses_plain_root_log_scaling():
    n, q = 1000, 0.5
    c = math.sqrt(2 * math.log(n))
    u = -math.log(-math.log(q))
    assert evt_quantile(Normal(1, 4), n, q) == pytest.approx(1 + 2 * (c + u / c))
    with pytest.raises(ValueError):
        evt_quantile(Normal(0, 1), 1, 0.5)


def test_evt_normal_relative_error_shrinks():
    # exact median of the max: Phi^-1(q^(1/n)); the root-log scaling converges slowly
    def rel_err(n, q=0.5):
        exact = stats.norm.isf(-math.expm1(math.log(q) / n))
        return abs(evt_quantile(Normal(0, 1), n, q) / exact - 1)

    errs = [rel_err(10.0**k) for k in (2, 4, 8, 16, 32)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.03


def test_evt_rejects_bad_inputs():
    with pytest.raises(ValueError):
        evt_quantile(ExactExponential(1), 10, 1.0)
    with pytest.raises(UnsupportedModelError):
        evt_quantile(SubExponential(1), 10, 0.5)


def test_empirical_quantile():
    assert empirical_max_quantile([5], 0.5) == 5
    assert empirical_max_quantile([1, 2, 3, 4], 0.5) == 2.5
    with pytest.raises(ValueError):
        empirical_max_quantile([], 0.5)


def test_empirical_max_quantile_matches_evt():
    u = Stream(4).uniforms(10_000 * 100).reshape(10_000, 100)
    maxima = (-np.log(u)).max(axis=1)
    assert abs(empirical_max_quantile(maxima, 0.5) - 4.9717) <= 0.15


def test_fit_tail_exponent_exponential():
    x = -np.log(Stream(1).uniforms(100_000))
    slope, r2 = fit_tail_exponent(x)
    assert slope == pytest.approx(-1, abs=0.05)
    assert r2 >= 0.99
    slope2, _ = fit_tail_exponent(2 * x)
    assert slope2 == pytest.approx(-0.5, abs=0.03)


def test_fit_tail_exponent_degenerate():
    with pytest.raises(FitError):
        fit_tail_exponent([3.0] * 50)
    with pytest.raises(FitError):
        fit_tail_exponent([1.0, 2.0])


def test_models_validate_parameters():
    with pytest.raises(ValueError):
        SubExponential(nu=-1)
    with pytest.raises(ValueError):
        Normal(0, 0)
