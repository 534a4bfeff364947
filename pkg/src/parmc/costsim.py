"""Virtual processor farm with tick-based cost accounting.

A farm runs ``m_eps`` processors, each executing ``n_eps`` replications of
a sampler back to back.  Time is virtual: a replication reports how many
ticks it spent and the farm only adds them up.  Replication ``(i, j)``
draws from the counter stream keyed by ``(seed, i, j)``, so ledgers do
not depend on execution order or thread count.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .rng import BatchStream, Stream

UNBOUNDED = None


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class SamplerError(RuntimeError):
    """A replication failed; carries its farm coordinates."""

    def __init__(self, processor, replication, cause):
        super().__init__(f"sampler failed at processor {processor}, replication {replication}: {cause}")
        self.processor = processor
        self.replication = replication


@dataclass(frozen=True)
class CostedSample:
    value: float
    cost: int

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"non-finite sample value {self.value!r}")
        if self.cost < 0:
            raise DomainError(f"negative cost {self.cost}")


@dataclass(frozen=True)
class FarmPlan:
    m_eps: int
    n_eps: int

    @property
    def replications(self) -> int:
        return self.m_eps * self.n_eps


@dataclass(frozen=True)
class FarmMetrics:
    total_cost: int
    worst_case: int
    average: float


class FarmLedger:
    """Per-processor cost and value logs.

    Stored flat with processor offsets so that farms with 10^5 processors
    stay cheap; ``per_processor_costs`` rebuilds the nested view.
    """

    def __init__(self, costs, values, offsets, seed=0):
        self.costs = np.asarray(costs, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.seed = int(seed)
        if self.costs.shape != self.values.shape:
            raise ValueError("costs and values must align")
        if self.offsets[0] != 0 or self.offsets[-1] != self.costs.size:
            raise ValueError("offsets do not cover the ledger")

    @classmethod
    def from_lists(cls, costs, values=None, seed=0) -> "FarmLedger":
        if values is None:
            values = [[0.0] * len(row) for row in costs]
        sizes = [len(row) for row in costs]
        if sizes != [len(row) for row in values]:
            raise ValueError("cost and value lists have different shapes")
        offsets = np.concatenate([[0], np.cumsum(sizes, dtype=np.int64)])
        flat_c = [c for row in costs for c in row]
        flat_v = [v for row in values for v in row]
        return cls(flat_c, flat_v, offsets, seed)

    @classmethod
    def from_grid(cls, costs, values, seed=0) -> "FarmLedger":
        """From m-by-n arrays (row i = processor i)."""
        costs = np.asarray(costs, dtype=np.int64)
        m, n = costs.shape
        offsets = np.arange(m + 1, dtype=np.int64) * n
        return cls(costs.ravel(), np.asarray(values, dtype=np.float64).ravel(), offsets, seed)

    @property
    def m_eps(self) -> int:
        return self.offsets.size - 1

    @property
    def per_processor_costs(self):
        return [self.costs[a:b].tolist() for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    @property
    def per_processor_values(self):
        return [self.values[a:b].tolist() for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def processor_totals(self) -> np.ndarray:
        sizes = np.diff(self.offsets)
        totals = np.zeros(self.m_eps, dtype=np.int64)
        nonempty = sizes > 0
        if self.costs.size:
            totals[nonempty] = np.add.reduceat(self.costs, self.offsets[:-1][nonempty])
        return totals

    def __eq__(self, other):
        if not isinstance(other, FarmLedger):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.costs, other.costs)
            and np.array_equal(self.values.view(np.uint64), other.values.view(np.uint64))
        )

    def __repr__(self):
        return f"FarmLedger(m_eps={self.m_eps}, replications={self.costs.size}, seed={self.seed})"


def _check_budget_inputs(variance_bound, epsilon, available):
    for name, x in (("variance_bound", variance_bound), ("epsilon", epsilon)):
        if not (isinstance(x, (int, float)) and math.isfinite(x) and x > 0):
            raise DomainError(f"{name} must be finite and positive, got {x!r}")
    if available is not None and (int(available) != available or available < 1):
        raise DomainError(f"available_processors must be a positive integer, got {available!r}")


def _plan(budget: float, available: Optional[int]) -> FarmPlan:
    need = max(1, math.ceil(budget))
    m = need if available is None else min(int(available), need)
    n = max(1, math.ceil(budget / m))
    return FarmPlan(m, n)


def plan_unbiased(variance_bound: float, epsilon: float, available_processors: Optional[int] = UNBOUNDED) -> FarmPlan:
    """Processors and replications so that the averaged unbiased output has variance <= epsilon**2."""
    _check_budget_inputs(variance_bound, epsilon, available_processors)
    return _plan(variance_bound / epsilon**2, available_processors)


def plan_biased(variance_bound: float, epsilon: float, available_processors: Optional[int] = UNBOUNDED) -> FarmPlan:
    """Same as :func:`plan_unbiased` with a variance budget of ``0.75 * epsilon**2``.

    The caller guarantees the sampler bias is at most ``epsilon / 2``.
    """
    _check_budget_inputs(variance_bound, epsilon, available_processors)
    return _plan(variance_bound / (0.75 * epsilon**2), available_processors)


def thread_count() -> int:
    raw = os.environ.get("PARMC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_chunks(fn: Callable, n_items: int, threads: Optional[int] = None, min_chunk: int = 4096):
    """Apply ``fn(start, stop)`` over contiguous chunks of ``range(n_items)``.

    Results come back in chunk order, so output never depends on the
    thread count.
    """
    threads = thread_count() if threads is None else threads
    n_chunks = max(1, min(threads, n_items // min_chunk))
    bounds = np.linspace(0, n_items, n_chunks + 1).astype(int)
    spans = list(zip(bounds[:-1], bounds[1:]))
    if n_chunks == 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=n_chunks) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))


def run_farm(plan: FarmPlan, sampler: Callable[[Stream], CostedSample], seed: int) -> FarmLedger:
    """Execute ``plan`` with a scalar sampler ``sampler(stream) -> CostedSample``."""
    m, n = plan.m_eps, plan.n_eps

    def work(i0, i1):
        costs = np.empty((i1 - i0, n), dtype=np.int64)
        values = np.empty((i1 - i0, n), dtype=np.float64)
        for i in range(i0, i1):
            for j in range(n):
                try:
                    s = sampler(Stream(seed, i, j))
                    if not isinstance(s, CostedSample):
                        s = CostedSample(*s)
                except Exception as exc:
                    raise SamplerError(i, j, exc) from exc
                costs[i - i0, j] = s.cost
                values[i - i0, j] = s.value
        return costs, values

    parts = map_chunks(work, m, min_chunk=64)
    costs = np.concatenate([p[0] for p in parts])
    values = np.concatenate([p[1] for p in parts])
    return FarmLedger.from_grid(costs, values, seed)


def run_farm_batch(plan: FarmPlan, batch_sampler: Callable[[BatchStream], tuple], seed: int) -> FarmLedger:
    """Execute ``plan`` with a vectorised sampler.

    ``batch_sampler(batch)`` returns ``(values, costs)`` arrays, one entry
    per lane.  Lane ``k`` of the farm grid is processor ``k // n_eps``,
    replication ``k % n_eps``, exactly the stream :func:`run_farm` would
    hand to a scalar sampler, so both routes give identical ledgers.
    """
    m, n = plan.m_eps, plan.n_eps
    grid = BatchStream.for_grid(seed, m, n)

    def work(a, b):
        values, costs = batch_sampler(grid.subset(slice(a, b)))
        values = np.asarray(values, dtype=np.float64)
        costs = np.asarray(costs, dtype=np.int64)
        bad = ~np.isfinite(values) | (costs < 0)
        if bad.any():
            k = a + int(np.flatnonzero(bad)[0])
            raise SamplerError(k // n, k % n, "non-finite value or negative cost")
        return values, costs

    parts = map_chunks(work, m * n)
    values = np.concatenate([p[0] for p in parts]).reshape(m, n)
    costs = np.concatenate([p[1] for p in parts]).reshape(m, n)
    return FarmLedger.from_grid(costs, values, seed)


def metrics(ledger: FarmLedger) -> FarmMetrics:
    if ledger.m_eps == 0 or ledger.costs.size == 0:
        raise DomainError("empty ledger")
    totals = ledger.processor_totals()
    total = int(totals.sum())
    return FarmMetrics(total_cost=total, worst_case=int(totals.max()), average=total / ledger.m_eps)


def aggregate(ledger: FarmLedger) -> float:
    if ledger.values.size == 0:
        raise DomainError("empty ledger")
    return float(ledger.values.mean())


def empirical_mse(estimates, truth: float) -> float:
    est = np.asarray(estimates, dtype=np.float64)
    if est.size == 0:
        raise DomainError("empty estimate list")
    return float(np.mean((est - truth) ** 2))


def write_ledger_csv(ledger: FarmLedger, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["processor", "replication", "cost_ticks", "value"])
        for i, (a, b) in enumerate(zip(ledger.offsets[:-1], ledger.offsets[1:])):
            for j in range(b - a):
                w.writerow([i, j, int(ledger.costs[a + j]), repr(float(ledger.values[a + j]))])


def write_metrics_csv(ledger: FarmLedger, plan: FarmPlan, path) -> None:
    mt = metrics(ledger)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["total_cost", "worst_case", "average", "m_eps", "n_eps", "seed"])
        w.writerow([mt.total_cost, mt.worst_case, repr(mt.average), plan.m_eps, plan.n_eps, ledger.seed])


def read_ledger_csv(path, seed=0) -> FarmLedger:
    rows = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.setdefault(int(rec["processor"]), []).append(
                (int(rec["replication"]), int(rec["cost_ticks"]), float(rec["value"]))
            )
    costs, values = [], []
    for i in sorted(rows):
        entries = sorted(rows[i])
        costs.append([c for _, c, _ in entries])
        values.append([v for _, _, v in entries])
    return FarmLedger.from_lists(costs, values, seed)
