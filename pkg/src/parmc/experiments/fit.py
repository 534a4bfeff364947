"""Least-squares helpers for scaling-law fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..costsim import DomainError


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float


def fit_linear(xs, ys) -> FitResult:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size != y.size:
        raise DomainError("xs and ys differ in length")
    if x.size < 3:
        raise DomainError("need at least 3 points")
    if np.ptp(x) == 0:
        raise DomainError("xs are all equal")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    sxy = float(np.sum((x - xm) * (y - ym)))
    slope = sxy / sxx
    intercept = ym - slope * xm
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return FitResult(float(slope), float(intercept), r2)


def fit_loglog(xs, ys) -> FitResult:
    """OLS of ln(y) on ln(x)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 3:
        raise DomainError("need at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("log-log fit needs positive data")
    return fit_linear(np.log(x), np.log(y))
