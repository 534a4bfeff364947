"""Parallel Monte Carlo cost accounting, MLMC estimators and coupled MCMC."""

from .costsim import (
    CostedSample,
    DomainError,
    FarmLedger,
    FarmMetrics,
    FarmPlan,
    SamplerError,
    aggregate,
    empirical_mse,
    metrics,
    plan_biased,
    plan_unbiased,
    run_farm,
    run_farm_batch,
)
from .rng import BatchStream, Stream, derive_seed

__all__ = [
    "BatchStream",
    "CostedSample",
    "DomainError",
    "FarmLedger",
    "FarmMetrics",
    "FarmPlan",
    "SamplerError",
    "Stream",
    "aggregate",
    "derive_seed",
    "empirical_mse",
    "metrics",
    "plan_biased",
    "plan_unbiased",
    "run_farm",
    "run_farm_batch",
]

__version__ = "0.1.0"
