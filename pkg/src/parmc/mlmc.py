"""Multilevel Monte Carlo estimators on a synthetic level family.

Four estimators share one :class:`LevelFamily`:

* ``giles_estimate``      -- fixed level count ``L`` and optimal ``N_l``;
* ``naive_parallel_run``  -- one draw per level, meant to be farmed out;
* ``rmlmc_sample``        -- random level ``N ~ p`` returning ``Delta_N / p(N)``;
* ``truncated_sample``    -- the same with ``p`` restricted to ``0..L``.

Stream layout for the single-level samplers: block 0 holds the level
uniform, block 1 the normal behind ``Delta_N``.  ``naive_parallel_run``
uses block ``l`` for level ``l``; ``giles_estimate`` reads its draws
sequentially, level by level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .costsim import CostedSample, DomainError
from .rng import BatchStream, Stream


@dataclass(frozen=True)
class LevelFamily:
    """Gaussian level differences with geometric bias, variance and cost.

    ``Delta_l ~ N(mean_delta(l), c2 2^(-beta l))`` with
    ``mean_delta(0) = 1 - 2^-alpha`` and ``mean_delta(l) = 2^(-alpha l)(1 - 2^-alpha)``,
    so the partial sums approach ``true_value = 1`` as ``1 - 2^(-alpha (l+1))``.
    """

    alpha: float
    beta: float
    gamma: float
    c2: float = 1.0
    c3: float = 1.0
    true_value: float = 1.0

    @property
    def c1(self) -> float:
        return 2.0 ** (-self.alpha)

    def mean_delta(self, l: int) -> float:
        return (1.0 - 2.0 ** (-self.alpha)) * 2.0 ** (-self.alpha * l)

    def var_delta(self, l: int) -> float:
        return self.c2 * 2.0 ** (-self.beta * l)

    def cost_ticks(self, l: int) -> int:
        return math.ceil(self.c3 * 2.0 ** (self.gamma * l))

    def partial_sum(self, l: int) -> float:
        return 1.0 - 2.0 ** (-self.alpha * (l + 1))

    def mean_delta_exact(self, l: int) -> Fraction:
        """Exact ``mean_delta(l)``; requires an integer ``alpha``."""
        if int(self.alpha) != self.alpha:
            raise DomainError("exact level means need an integer alpha")
        a = int(self.alpha)
        return (1 - Fraction(1, 2**a)) * Fraction(1, 2 ** (a * l))

    # vectorised helpers over level arrays
    def _means(self, levels):
        levels = np.asarray(levels, dtype=float)
        return (1.0 - 2.0 ** (-self.alpha)) * np.exp2(-self.alpha * levels)

    def _sds(self, levels):
        return np.sqrt(self.c2 * np.exp2(-self.beta * np.asarray(levels, dtype=float)))

    def _costs(self, levels):
        return np.ceil(self.c3 * np.exp2(self.gamma * np.asarray(levels, dtype=float))).astype(np.int64)

    def sample(self, l: int, stream: Stream) -> CostedSample:
        """One draw of ``Delta_l``; consumes one block."""
        z = stream.normal()
        return CostedSample(self.mean_delta(l) + math.sqrt(self.var_delta(l)) * z, self.cost_ticks(l))


def synthetic_family(alpha, beta, gamma, c2=1.0, c3=1.0) -> LevelFamily:
    for name, x in (("alpha", alpha), ("beta", beta), ("c3", c3)):
        if not (math.isfinite(x) and x > 0):
            raise DomainError(f"{name} must be positive, got {x!r}")
    if not (math.isfinite(gamma) and gamma >= 0):
        raise DomainError(f"gamma must be non-negative, got {gamma!r}")
    if not (math.isfinite(c2) and c2 >= 0):
        raise DomainError(f"c2 must be non-negative, got {c2!r}")
    if not beta > gamma:
        raise DomainError(f"need beta > gamma, got beta={beta}, gamma={gamma}")
    if alpha < max(beta, gamma) / 2:
        raise DomainError(f"need alpha >= max(beta, gamma)/2, got alpha={alpha}")
    return LevelFamily(float(alpha), float(beta), float(gamma), float(c2), float(c3))


@dataclass(frozen=True)
class LevelPmf:
    """Level distribution: finite ``probabilities`` or geometric ``(1-r) r^n``."""

    probabilities: Optional[tuple] = None
    ratio: Optional[float] = None

    def __post_init__(self):
        if (self.probabilities is None) == (self.ratio is None):
            raise ValueError("give exactly one of probabilities or ratio")
        if self.ratio is not None and not 0.0 < self.ratio < 1.0:
            raise DomainError(f"geometric ratio must lie in (0, 1), got {self.ratio}")
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=float)
            if p.size == 0 or np.any(p <= 0):
                raise DomainError("finite pmf must have strictly positive mass on its support")
            if abs(p.sum() - 1.0) > 1e-12:
                raise DomainError(f"pmf sums to {p.sum()!r}")

    @property
    def max_level(self) -> Optional[int]:
        return None if self.probabilities is None else len(self.probabilities) - 1

    def pmf(self, n):
        n = np.asarray(n)
        if self.ratio is not None:
            return (1.0 - self.ratio) * self.ratio ** n.astype(float)
        return np.asarray(self.probabilities, dtype=float)[n]

    def level_from_uniform(self, u):
        """Inverse-CDF level draw from uniforms in (0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.ratio is not None:
            # P[N >= n] = r^n
            return np.floor(np.log(u) / math.log(self.ratio)).astype(np.int64)
        cdf = np.cumsum(self.probabilities)
        cdf[-1] = 1.0
        return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1).astype(np.int64)


@dataclass(frozen=True)
class GilesAllocation:
    L: int
    N_l: tuple


def _check_positive(**kw):
    for name, x in kw.items():
        if not (math.isfinite(x) and x > 0):
            raise DomainError(f"{name} must be positive, got {x!r}")


def giles_levels(epsilon: float, alpha: float, c1: float) -> int:
    """``ceil(log2(2 c1 / epsilon) / alpha)``, at least 0."""
    _check_positive(epsilon=epsilon, alpha=alpha, c1=c1)
    return max(0, math.ceil(math.log2(2.0 * c1 / epsilon) / alpha))


def giles_allocation(epsilon: float, family: LevelFamily, L: int) -> GilesAllocation:
    _check_positive(epsilon=epsilon)
    if L < 0:
        raise DomainError("L must be non-negative")
    V = np.array([family.var_delta(l) for l in range(L + 1)])
    C = np.array([family.cost_ticks(l) for l in range(L + 1)], dtype=float)
    total = float(np.sum(np.sqrt(C * V)))
    N = [max(1, math.ceil((4.0 / 3.0) * epsilon**-2 * math.sqrt(v / c) * total)) for v, c in zip(V, C)]
    return GilesAllocation(L, tuple(N))


def giles_variance(family: LevelFamily, alloc: GilesAllocation) -> float:
    return float(sum(family.var_delta(l) / n for l, n in enumerate(alloc.N_l)))


def giles_estimate(family: LevelFamily, epsilon: float, stream: Stream) -> CostedSample:
    L = giles_levels(epsilon, family.alpha, family.c1)
    alloc = giles_allocation(epsilon, family, L)
    value, cost = 0.0, 0
    for l, n in enumerate(alloc.N_l):
        z = stream.normals(n)
        value += family.mean_delta(l) + math.sqrt(family.var_delta(l)) * float(z.mean())
        cost += n * family.cost_ticks(l)
    return CostedSample(value, cost)


def naive_parallel_run(family: LevelFamily, epsilon: float, stream: Stream) -> CostedSample:
    """One draw on every level ``0..L``; level ``l`` uses block ``l``."""
    L = giles_levels(epsilon, family.alpha, family.c1)
    base = stream.cursor
    stream.cursor += L + 1
    value, cost = 0.0, 0
    for l in range(L + 1):
        value += family.mean_delta(l) + math.sqrt(family.var_delta(l)) * stream.normal_at(base + l)
        cost += family.cost_ticks(l)
    return CostedSample(value, cost)


def naive_parallel_batch(family: LevelFamily, epsilon: float, batch: BatchStream):
    L = giles_levels(epsilon, family.alpha, family.c1)
    value = np.zeros(len(batch))
    for l in range(L + 1):
        value = value + (family.mean_delta(l) + math.sqrt(family.var_delta(l)) * batch.normal_at(l))
    cost = np.full(len(batch), sum(family.cost_ticks(l) for l in range(L + 1)), dtype=np.int64)
    return value, cost


def naive_variance(family: LevelFamily, epsilon: float) -> float:
    L = giles_levels(epsilon, family.alpha, family.c1)
    return float(sum(family.var_delta(l) for l in range(L + 1)))


def rmlmc_pmf(beta: float, gamma: float) -> LevelPmf:
    """Geometric pmf with ratio ``2^(-(beta+gamma)/2)`` on all levels."""
    if not beta > gamma:
        raise DomainError(f"need beta > gamma, got beta={beta}, gamma={gamma}")
    return LevelPmf(ratio=2.0 ** (-(beta + gamma) / 2.0))


def truncated_pmf(beta: float, gamma: float, L: int) -> LevelPmf:
    """Weights ``2^(-(beta+gamma) n / 2)`` on ``0..L``, renormalised."""
    if not beta > gamma:
        raise DomainError(f"need beta > gamma, got beta={beta}, gamma={gamma}")
    if L < 0:
        raise DomainError("L must be non-negative")
    w = np.exp2(-(beta + gamma) * np.arange(L + 1) / 2.0)
    p = w / w.sum()
    p[-1] = 1.0 - np.cumsum(p[:-1])[-1] if L > 0 else 1.0
    return LevelPmf(probabilities=tuple(float(x) for x in p))


def _weighted_draw(family, pmf, level, z):
    p = pmf.pmf(level)
    delta = family._means(level) + family._sds(level) * z
    return delta / p, family._costs(level)


def rmlmc_sample(family: LevelFamily, pmf: LevelPmf, stream: Stream) -> CostedSample:
    """``Delta_N / p(N)`` with ``N ~ pmf``; consumes two blocks."""
    base = stream.cursor
    stream.cursor += 2
    n = pmf.level_from_uniform(stream.uniform_at(base))
    value, cost = _weighted_draw(family, pmf, n, stream.normal_at(base + 1))
    return CostedSample(float(value), int(cost))


def truncated_sample(family: LevelFamily, pmf: LevelPmf, stream: Stream) -> CostedSample:
    if pmf.max_level is None:
        raise DomainError("truncated_sample needs a finite-support pmf")
    return rmlmc_sample(family, pmf, stream)


def rmlmc_batch(family: LevelFamily, pmf: LevelPmf, batch: BatchStream):
    """Vectorised :func:`rmlmc_sample`; returns ``(values, costs)``."""
    n = pmf.level_from_uniform(batch.uniform_at(0))
    return _weighted_draw(family, pmf, n, batch.normal_at(1))


def rmlmc_variance_oracle(family: LevelFamily, pmf: LevelPmf, tail_cut: int = 200, with_remainder: bool = False):
    """Analytic ``Var(Delta_N / p(N))``.

    Finite pmfs are summed exactly.  For the geometric pmf the series is
    cut after level ``tail_cut``; the neglected tail is bounded by
    ``a_{cut+1} / (1 - rho)`` with ``rho`` the worst term ratio.
    """
    if pmf.max_level is not None:
        levels = np.arange(pmf.max_level + 1)
        second = float(np.sum((family._sds(levels) ** 2 + family._means(levels) ** 2) / pmf.pmf(levels)))
        mean = float(np.sum(family._means(levels)))
        var = second - mean**2
        return (var, 0.0) if with_remainder else var
    r = pmf.ratio
    rho = max(2.0 ** (-family.beta), 2.0 ** (-2.0 * family.alpha)) / r
    if rho >= 1.0:
        raise DomainError("second-moment series diverges for this pmf")
    levels = np.arange(tail_cut + 1)

    def terms(ls):
        return (family._sds(ls) ** 2 + family._means(ls) ** 2) / pmf.pmf(ls)

    second = float(np.sum(terms(levels)))
    remainder = float(terms(np.array([tail_cut + 1]))[0]) / (1.0 - rho)
    var = second - family.true_value**2
    return (var, remainder) if with_remainder else var


def giles_sampler(family: LevelFamily, epsilon: float):
    return lambda stream: giles_estimate(family, epsilon, stream)


def naive_sampler(family: LevelFamily, epsilon: float):
    return lambda batch: naive_parallel_batch(family, epsilon, batch)


def rmlmc_sampler(family: LevelFamily, pmf: LevelPmf):
    return lambda batch: rmlmc_batch(family, pmf, batch)

