"""Scenario configuration: embedded defaults overlaid with a flat JSON file."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

SCENARIOS = ("mcmc-case-study", "mlmc-sweep", "tail-bench", "farm-demo")

_FAMILY = {"alpha": 1.0, "beta": 2.0, "gamma": 1.0, "c2": 1.0, "c3": 1.0}

DEFAULTS = {
    "mcmc-case-study": {
        "seed": 1,
        "repetitions": 100,
        "sigma": 2.38,
        "init_mean": 1.0,
        "init_sd": 1.0,
        "target_mean": 0.0,
        "k": 0,
        # half-decade grid plus the 2.5e4 point used for the growth ratio
        "M_grid": [1, 3, 10, 32, 100, 316, 1000, 3162, 10000, 25000, 31623, 100000],
        "N_grid": [10, 20, 30, 50, 100],
        "runs_csv_limit": 1000,
    },
    "mlmc-sweep": {
        "seed": 1,
        # rMLMC worst-case cost has a heavy tail; the slope needs many reps
        "repetitions": 2000,
        "eps_grid": [0.025, 0.05, 0.1, 0.2],
        "estimators": ["giles", "naive", "rmlmc", "truncated"],
        **_FAMILY,
    },
    "tail-bench": {
        "seed": 1,
        "repetitions": 10000,
        "n_grid": [1, 10, 100, 1000],
        "quantiles": [0.25, 0.5, 0.75],
        "distributions": ["exponential", "normal", "pareto"],
        "pareto_gamma": 2.0,
    },
    "farm-demo": {
        "seed": 1,
        "repetitions": 1,
        "estimator": "rmlmc",
        "epsilon": 0.1,
        "available_processors": 64,
        "sigma": 2.38,
        **_FAMILY,
    },
}

_GRIDS = ("M_grid", "N_grid", "eps_grid", "n_grid", "quantiles")
DISTRIBUTIONS = ("exponential", "normal", "pareto")
FARM_ESTIMATORS = ("giles", "naive", "rmlmc", "truncated", "unbiased-mcmc")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    seed: int
    repetitions: int
    params: dict = field(default_factory=dict)
    output_dir: Path = Path("out")

    def __getitem__(self, key):
        return self.params[key]


def _validate(scenario, params):
    for g in _GRIDS:
        if g in params:
            grid = params[g]
            if not isinstance(grid, list) or not grid:
                raise ConfigError(f"{g} must be a non-empty list")
            if any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in grid):
                raise ConfigError(f"{g} must hold numbers")
            if list(grid) != sorted(grid) or len(set(grid)) != len(grid):
                raise ConfigError(f"{g} must be strictly ascending")
            if any(v <= 0 for v in grid):
                raise ConfigError(f"{g} must be positive")
    if params["repetitions"] < 1 or int(params["repetitions"]) != params["repetitions"]:
        raise ConfigError("repetitions must be a positive integer")
    if not (0 <= int(params["seed"]) < 2**64):
        raise ConfigError("seed must fit in 64 bits")
    if scenario == "mcmc-case-study":
        if any(int(m) != m for m in params["M_grid"] + params["N_grid"]):
            raise ConfigError("M_grid and N_grid must be integers")
        if params["sigma"] <= 0 or params["init_sd"] <= 0 or params["k"] < 0:
            raise ConfigError("sigma, init_sd must be positive and k non-negative")
    if scenario == "tail-bench":
        bad = [d for d in params["distributions"] if d not in DISTRIBUTIONS]
        if bad:
            raise ConfigError(f"unsupported distribution(s): {', '.join(bad)}")
        if any(not 0 < q < 1 for q in params["quantiles"]):
            raise ConfigError("quantiles must lie in (0, 1)")
        if any(int(n) != n for n in params["n_grid"]):
            raise ConfigError("n_grid must be integers")
    if scenario in ("mlmc-sweep", "farm-demo"):
        from ..mlmc import synthetic_family

        try:
            synthetic_family(params["alpha"], params["beta"], params["gamma"], params["c2"], params["c3"])
        except ValueError as exc:
            raise ConfigError(f"invalid level family: {exc}") from exc
    if scenario == "mlmc-sweep":
        if not params["beta"] > params["gamma"]:
            raise ConfigError("mlmc-sweep needs beta > gamma")
        bad = [e for e in params["estimators"] if e not in FARM_ESTIMATORS[:4]]
        if bad:
            raise ConfigError(f"unknown estimator(s): {', '.join(bad)}")
    if scenario == "farm-demo":
        if params["estimator"] not in FARM_ESTIMATORS:
            raise ConfigError(f"unknown estimator {params['estimator']!r}")
        if params["epsilon"] <= 0:
            raise ConfigError("epsilon must be positive")


def load_config(scenario: str, path=None, seed=None, repetitions=None, output_dir=None, **overrides) -> ExperimentConfig:
    """Defaults for ``scenario``, then the JSON file at ``path``, then explicit overrides."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    params = copy.deepcopy(DEFAULTS[scenario])
    layers = []
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data.pop("scenario", None)
        layers.append(data)
    layers.append({k: v for k, v in overrides.items() if v is not None})
    if seed is not None:
        layers.append({"seed": seed})
    if repetitions is not None:
        layers.append({"repetitions": repetitions})
    out = None
    for layer in layers:
        for k, v in layer.items():
            if k == "output_dir":
                out = v
                continue
            if k not in params:
                raise ConfigError(f"unknown key {k!r} for scenario {scenario}")
            params[k] = v
    _validate(scenario, params)
    if output_dir is not None:
        out = output_dir
    return ExperimentConfig(
        scenario=scenario,
        seed=int(params["seed"]),
        repetitions=int(params["repetitions"]),
        params=params,
        output_dir=Path(out if out is not None else "out"),
    )
