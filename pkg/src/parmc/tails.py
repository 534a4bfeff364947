"""Expected-maximum bounds, extreme-value quantiles and tail diagnostics
for the cost of one replication."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class UnsupportedModelError(TypeError):
    """No closed form exists for this tail model."""


class FitError(ValueError):
    """Tail regression is undefined for the given samples."""


def _positive(name, x):
    if not (math.isfinite(x) and x > 0):
        raise ValueError(f"{name} must be finite and positive, got {x!r}")


@dataclass(frozen=True)
class FiniteMoment:
    p: float

    def __post_init__(self):
        _positive("p", self.p)


@dataclass(frozen=True)
class SubExponential:
    nu: float
    alpha: float = 1.0
    mean: float = 0.0

    def __post_init__(self):
        _positive("nu", self.nu)
        _positive("alpha", self.alpha)


@dataclass(frozen=True)
class SubGaussian:
    sigma2: float
    mean: float = 0.0

    def __post_init__(self):
        _positive("sigma2", self.sigma2)


@dataclass(frozen=True)
class RegularVarying:
    C: float
    gamma: float

    def __post_init__(self):
        _positive("C", self.C)
        _positive("gamma", self.gamma)


@dataclass(frozen=True)
class ExactExponential:
    alpha: float

    def __post_init__(self):
        _positive("alpha", self.alpha)


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma2: float

    def __post_init__(self):
        _positive("sigma2", self.sigma2)


TailModel = Union[FiniteMoment, SubExponential, SubGaussian, RegularVarying, ExactExponential, Normal]


def bound_expected_max(model: TailModel, n: int) -> float:
    """Upper bound on E[max of n i.i.d. costs] for light-tailed models.

    Sub-exponential: ``mean + nu (ln n + 1)``.
    Sub-Gaussian: ``mean + sigma sqrt(2 ln n) + 1/sqrt(2 ln 2)``.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if isinstance(model, SubExponential):
        return model.mean + model.nu * (math.log(n) + 1.0)
    if isinstance(model, SubGaussian):
        return model.mean + math.sqrt(model.sigma2) * math.sqrt(2.0 * math.log(n)) + 1.0 / math.sqrt(2.0 * math.log(2.0))
    raise UnsupportedModelError(f"no closed-form expected-max bound for {type(model).__name__}")


def evt_quantile(model: TailModel, n: int, q: float) -> float:
    """Asymptotic q-quantile of the maximum of n i.i.d. draws."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    gumbel = -math.log(-math.log(q))
    if isinstance(model, RegularVarying):
        # Frechet limit with a_n = n^(1/gamma)
        return (n * model.C / -math.log(q)) ** (1.0 / model.gamma)
    if isinstance(model, ExactExponential):
        return (math.log(n) + gumbel) / model.alpha
    if isinstance(model, Normal):
        if n < 2:
            raise ValueError("normal maxima normalisation needs n >= 2")
        c_n = math.sqrt(2.0 * math.log(n))
        return model.mu + math.sqrt(model.sigma2) * (c_n + gumbel / c_n)
    raise UnsupportedModelError(f"no extreme-value quantile for {type(model).__name__}")


def empirical_max_quantile(maxima_samples, q: float) -> float:
    """Empirical quantile, linear interpolation between order statistics."""
    x = np.asarray(maxima_samples, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    return float(np.quantile(x, q, method="linear"))


def fit_tail_exponent(survival_samples, max_points: int = 200):
    """Slope of ln P[X > t] against t over [median, 99th percentile].

    Thresholds are the distinct sample values in that window (thinned to
    ``max_points`` evenly spaced ones when the window is dense).  Returns
    ``(slope, r_squared)``.
    """
    x = np.sort(np.asarray(survival_samples, dtype=float))
    if x.size < 10:
        raise FitError("need at least 10 samples")
    lo, hi = np.quantile(x, [0.5, 0.99])
    window = np.unique(x[(x >= lo) & (x <= hi)])
    if window.size > max_points:
        window = np.linspace(lo, hi, max_points)
    surv = 1.0 - np.searchsorted(x, window, side="right") / x.size
    keep = surv > 0
    t, s = window[keep], np.log(surv[keep])
    if t.size < 2 or np.ptp(t) == 0:
        raise FitError("degenerate samples: fewer than two distinct thresholds")
    slope, intercept = np.polyfit(t, s, 1)
    resid = s - (slope * t + intercept)
    ss_tot = float(np.sum((s - s.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
