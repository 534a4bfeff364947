"""Seeded scenario runners.  Each writes CSV and SVG files into
``config.output_dir`` and returns a :class:`ScenarioResult` whose
``checks`` list the pass/fail acceptance properties for that scenario."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List

import numpy as np

from .. import costsim, mcmc, mlmc, tails
from ..rng import BatchStream, derive_seed
from .config import ExperimentConfig
from .fit import FitResult, fit_linear, fit_loglog
from .svg import Axes, emit_svg_figure


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass
class ScenarioResult:
    files: List[Path] = field(default_factory=list)
    fits: Dict[str, FitResult] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, header, rows, result: ScenarioResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _num(v) for v in r])
    result.files.append(path)


def _batched(fn, batch: BatchStream):
    """Run a vectorised sampler over thread chunks of ``batch`` and reassemble."""
    parts = costsim.map_chunks(lambda a, b: fn(batch.subset(slice(a, b))), len(batch))
    return tuple(np.concatenate([p[i] for p in parts], axis=-1) for i in range(len(parts[0])))


# ---------------------------------------------------------------------------
# mcmc case study


def run_mcmc_case_study(config: ExperimentConfig) -> ScenarioResult:
    p = config.params
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = ScenarioResult()
    target = mcmc.gaussian_target(p["target_mean"], 1.0, p["init_mean"], p["init_sd"])
    truth = p["target_mean"]
    f = _identity
    sigma, k = float(p["sigma"]), int(p["k"])
    Ms = [int(m) for m in p["M_grid"]]
    Ns = [int(n) for n in p["N_grid"]]
    M_max = Ms[-1]
    R = config.repetitions
    mi = np.array(Ms) - 1

    T = np.empty((R, len(Ms)))
    err_u = np.empty((R, len(Ms)))
    err_s = np.empty((R, len(Ns), len(Ms)))
    tau_counts: Dict[int, int] = {}
    runs_rows = []
    for r in range(R):
        ub = BatchStream(derive_seed(config.seed, 0, r), np.arange(M_max), np.zeros(M_max))
        h, tau, cost = _batched(lambda b: mcmc.unbiased_mcmc_batch(target, f, k, sigma, b), ub)
        T[r] = np.maximum.accumulate(cost)[mi]
        err_u[r] = (np.cumsum(h)[mi] / np.array(Ms) - truth) ** 2
        vals, cnts = np.unique(tau, return_counts=True)
        for v, c in zip(vals, cnts):
            tau_counts[int(v)] = tau_counts.get(int(v), 0) + int(c)

        sb = BatchStream(derive_seed(config.seed, 1, r), np.arange(M_max), np.zeros(M_max))
        (est,) = _batched(lambda b: (mcmc.rwm_chain_batch(target, f, Ns, b, sigma),), sb)
        err_s[r] = (np.cumsum(est, axis=1)[:, mi] / np.array(Ms) - truth) ** 2
        if r == 0:
            lim = min(M_max, int(p["runs_csv_limit"]))
            runs_rows += [("unbiased", int(tau[j]), float(h[j]), int(cost[j])) for j in range(lim)]
            for a, n in enumerate(Ns):
                runs_rows += [("standard", n, float(est[a, j]), n) for j in range(lim)]

    T_mean, eu_mean, es_mean = T.mean(0), err_u.mean(0), err_s.mean(0)
    _write_csv(out / "fig1.csv", ["M", "T", "err2"], zip(Ms, T_mean, eu_mean), res)
    _write_csv(
        out / "fig1_reps.csv", ["rep", "M", "T", "err2"],
        [(r, Ms[j], T[r, j], err_u[r, j]) for r in range(R) for j in range(len(Ms))], res,
    )
    rows2 = [("unbiased", "", Ms[j], eu_mean[j], T_mean[j]) for j in range(len(Ms))]
    rows2 += [("standard", n, Ms[j], es_mean[a, j], n) for a, n in enumerate(Ns) for j in range(len(Ms))]
    _write_csv(out / "fig2.csv", ["method", "N", "M", "err2", "completion"], rows2, res)
    reps2 = [(r, "unbiased", "", Ms[j], err_u[r, j], T[r, j]) for r in range(R) for j in range(len(Ms))]
    reps2 += [
        (r, "standard", n, Ms[j], err_s[r, a, j], n)
        for r in range(R) for a, n in enumerate(Ns) for j in range(len(Ms))
    ]
    _write_csv(out / "fig2_reps.csv", ["rep", "method", "N", "M", "err2", "completion"], reps2, res)
    _write_csv(out / "taus.csv", ["tau", "count"], sorted(tau_counts.items()), res)
    _write_csv(out / "runs.csv", ["method", "n_or_tau", "value", "cost_ticks"], runs_rows, res)

    fits = {}
    if len(Ms) >= 3:
        fits["err2_vs_M"] = fit_loglog(Ms, eu_mean)
        fits["T_vs_lnM"] = fit_linear(np.log(Ms), T_mean)
    all_taus = np.repeat(*zip(*sorted(tau_counts.items())))
    try:
        _, kappa, r2 = mcmc.coupling_time_tail(all_taus, with_r2=True)
        fits["tau_log_survival"] = FitResult(math.log(kappa), math.nan, r2)
    except tails.FitError:
        pass
    res.fits.update(fits)
    _write_csv(
        out / "fits.csv", ["fit", "slope", "intercept", "r_squared"],
        [(name, fr.slope, fr.intercept, fr.r_squared) for name, fr in fits.items()], res,
    )

    # figures
    fig1 = [
        ({"unbiased": (Ms, T_mean)}, Axes("(a) completion time", "M", "T(M)", logx=True)),
        ({"unbiased": (T_mean, eu_mean)}, Axes("(b) error vs completion", "T(M)", "err^2", logy=True)),
        ({"unbiased": (Ms, eu_mean)}, Axes("(c) error vs processors", "M", "err^2", logx=False, logy=True)),
    ]
    d_series = {"err^2": (Ms, eu_mean)}
    if "err2_vs_M" in fits:
        fr = fits["err2_vs_M"]
        d_series[f"fit slope {fr.slope:.3f}"] = (Ms, np.exp(fr.intercept + fr.slope * np.log(Ms)))
    fig1.append((d_series, Axes("(d) log-log with fit", "M", "err^2", logx=True, logy=True)))
    emit_svg_figure(out / "fig1.svg", fig1)
    res.files.append(out / "fig1.svg")
    a_series = {"unbiased": (Ms, eu_mean)}
    for a, n in enumerate(Ns):
        a_series[f"standard N={n}"] = (Ms, es_mean[a])
    comp = [T_mean[-1]] + Ns
    errs = [eu_mean[-1]] + list(es_mean[:, -1])
    order = np.argsort(comp)
    fig2 = [
        (a_series, Axes("(a) err^2 vs processors", "M", "err^2", logx=True, logy=True)),
        ({"standard": (Ns, es_mean[:, -1]), "unbiased": ([T_mean[-1]], [eu_mean[-1]])},
         Axes(f"(b) err^2 vs completion, M={M_max}", "completion", "err^2", logy=True)),
        ({"all methods": (np.array(comp)[order], np.array(errs)[order])},
         Axes("(c) log err^2 vs log completion", "completion", "err^2", logx=True, logy=True)),
    ]
    emit_svg_figure(out / "fig2.svg", fig2)
    res.files.append(out / "fig2.svg")

    res.summary = {"T": dict(zip(Ms, T_mean)), "err2_unbiased": dict(zip(Ms, eu_mean)),
                   "err2_standard": {n: dict(zip(Ms, es_mean[a])) for a, n in enumerate(Ns)}}
    res.checks += _mcmc_checks(Ms, Ns, T_mean, err_u, err_s, fits)
    return res


def _identity(x):
    return x


def _mcmc_checks(Ms, Ns, T_mean, err_u, err_s, fits):
    checks = []
    if "err2_vs_M" in fits:
        s = fits["err2_vs_M"].slope
        checks.append(Check("fig1d_slope", -1.1 <= s <= -0.9, f"slope of log err2 vs log M = {s:.4f} (want [-1.1, -0.9])"))
        r2 = fits["T_vs_lnM"].r_squared
        checks.append(Check("fig1a_log_growth_r2", r2 >= 0.9, f"r^2 of T vs ln M = {r2:.4f} (want >= 0.9)"))
    if "tau_log_survival" in fits:
        r2 = fits["tau_log_survival"].r_squared
        checks.append(Check("tau_geometric_tail_r2", r2 >= 0.95, f"r^2 of log P[tau > n] vs n = {r2:.4f} (want >= 0.95)"))
    if 25000 in Ms and 100000 in Ms:
        ratio = T_mean[Ms.index(100000)] / T_mean[Ms.index(25000)]
        checks.append(Check("fig1a_growth_ratio", ratio <= 1.25, f"T(1e5)/T(2.5e4) = {ratio:.4f} (want <= 1.25)"))
    if 100 in Ns and 100 in Ms and 100000 in Ms:
        a = Ns.index(100)
        hi, lo = Ms.index(100000), Ms.index(100)
        frac_hi = float(np.mean(err_u[:, hi] < err_s[:, a, hi]))
        frac_lo = float(np.mean(err_s[:, a, lo] < err_u[:, lo]))
        checks.append(Check(
            "fig2_crossover_large_M", frac_hi >= 0.95,
            f"fraction of reps with unbiased err2 < standard(N=100) err2 at M=1e5: {frac_hi:.3f} "
            f"(mean err2 {err_u[:, hi].mean():.3e} vs {err_s[:, a, hi].mean():.3e}; want >= 0.95)"))
        checks.append(Check(
            "fig2_crossover_small_M", frac_lo >= 0.95,
            f"fraction of reps with standard(N=100) err2 < unbiased err2 at M=1e2: {frac_lo:.3f} (want >= 0.95)"))
    if 10 in Ns and 100 in Ns:
        j = len(Ms) - 1
        ratio = err_s[:, Ns.index(10), j].mean() / err_s[:, Ns.index(100), j].mean()
        checks.append(Check("bias_plateau_ratio", 25 <= ratio <= 400,
                            f"plateau(N=10)/plateau(N=100) at M={Ms[j]} = {ratio:.2f} (want [25, 400])"))
    return checks


# ---------------------------------------------------------------------------
# mlmc sweep


def _family(p):
    return mlmc.synthetic_family(p["alpha"], p["beta"], p["gamma"], p["c2"], p["c3"])


def build_mlmc_run(name: str, family: mlmc.LevelFamily, eps: float, available=None):
    """Plan and sampler for one estimator at accuracy ``eps``.

    Returns ``(plan, sampler, is_batch, variance)``.
    """
    if name == "giles":
        L = mlmc.giles_levels(eps, family.alpha, family.c1)
        v = mlmc.giles_variance(family, mlmc.giles_allocation(eps, family, L))
        return costsim.plan_biased(v, eps, available), mlmc.giles_sampler(family, eps), False, v
    if name == "naive":
        v = mlmc.naive_variance(family, eps)
        return costsim.plan_biased(v, eps, available), mlmc.naive_sampler(family, eps), True, v
    if name == "rmlmc":
        pmf = mlmc.rmlmc_pmf(family.beta, family.gamma)
        v = mlmc.rmlmc_variance_oracle(family, pmf)
        return costsim.plan_unbiased(v, eps, available), mlmc.rmlmc_sampler(family, pmf), True, v
    if name == "truncated":
        L = mlmc.giles_levels(eps, family.alpha, family.c1)
        pmf = mlmc.truncated_pmf(family.beta, family.gamma, L)
        v = mlmc.rmlmc_variance_oracle(family, pmf)
        return costsim.plan_biased(v, eps, available), mlmc.rmlmc_sampler(family, pmf), True, v
    raise ValueError(f"unknown estimator {name!r}")


def run_farm_for(plan, sampler, is_batch, seed):
    if is_batch:
        return costsim.run_farm_batch(plan, sampler, seed)
    return costsim.run_farm(plan, sampler, seed)


def run_mlmc_sweep(config: ExperimentConfig) -> ScenarioResult:
    p = config.params
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = ScenarioResult()
    fam = _family(p)
    eps_grid = [float(e) for e in p["eps_grid"]]
    names = list(p["estimators"])
    R = config.repetitions
    rows = []
    summary = {}
    for ei, eps in enumerate(eps_grid):
        for ni, name in enumerate(names):
            plan, sampler, is_batch, v = build_mlmc_run(name, fam, eps)
            tot, worst, avg, vals = [], [], [], []
            for r in range(R):
                ledger = run_farm_for(plan, sampler, is_batch, derive_seed(config.seed, ei, ni, r))
                mt = costsim.metrics(ledger)
                value = costsim.aggregate(ledger)
                rows.append((name, eps, r, value, mt.total_cost, mt.worst_case, mt.average, plan.m_eps, plan.n_eps))
                tot.append(mt.total_cost)
                worst.append(mt.worst_case)
                avg.append(mt.average)
                vals.append(value)
            summary[(name, eps)] = {
                "total_cost": float(np.mean(tot)), "worst_case": float(np.mean(worst)),
                "average": float(np.mean(avg)), "mse": costsim.empirical_mse(vals, fam.true_value),
                "m_eps": plan.m_eps, "n_eps": plan.n_eps, "variance": v,
            }
    _write_csv(out / "mlmc.csv",
               ["estimator", "epsilon", "rep", "value", "cost_ticks", "worst_case", "average", "m_eps", "n_eps"],
               rows, res)
    srows = [(n, e, s["m_eps"], s["n_eps"], s["variance"], s["total_cost"], s["worst_case"], s["average"], s["mse"])
             for (n, e), s in summary.items()]
    _write_csv(out / "mlmc_summary.csv",
               ["estimator", "epsilon", "m_eps", "n_eps", "variance", "total_cost", "worst_case", "average", "mse"],
               srows, res)

    slope_rows = []
    inv = [1.0 / e for e in eps_grid]
    if len(eps_grid) >= 3:
        for name in names:
            for metric in ("total_cost", "worst_case", "average"):
                ys = [summary[(name, e)][metric] for e in eps_grid]
                fr = fit_loglog(inv, ys)
                res.fits[f"{name}:{metric}"] = fr
                slope_rows.append((name, metric, fr.slope, fr.intercept, fr.r_squared))
    _write_csv(out / "mlmc_slopes.csv", ["estimator", "metric", "slope", "intercept", "r_squared"], slope_rows, res)

    panels = []
    for metric in ("total_cost", "worst_case"):
        series = {n: (inv[::-1], [summary[(n, e)][metric] for e in eps_grid][::-1]) for n in names}
        panels.append((series, Axes(metric.replace("_", " "), "1/epsilon", "ticks", logx=True, logy=True)))
    emit_svg_figure(out / "mlmc.svg", panels)
    res.files.append(out / "mlmc.svg")
    res.summary = summary
    res.checks += _mlmc_checks(fam, eps_grid, names, summary, res.fits)
    return res


def truncated_bias_exact(family: mlmc.LevelFamily, eps: float):
    """``(|s_L - 1|, eps/2)`` in exact rationals with ``L = giles_levels(eps)``."""
    L = mlmc.giles_levels(eps, family.alpha, family.c1)
    s_L = sum((family.mean_delta_exact(l) for l in range(L + 1)), Fraction(0))
    return abs(s_L - Fraction(family.true_value)), Fraction(str(eps)) / 2


def _mlmc_checks(fam, eps_grid, names, summary, fits):
    checks = []
    g_over_a = fam.gamma / fam.alpha
    rml_cap = 4 * fam.gamma / (fam.beta + fam.gamma) + 0.15

    def slope_check(key, lo, hi, label):
        if key in fits:
            s = fits[key].slope
            checks.append(Check(label, lo <= s <= hi, f"slope {s:.4f} (want [{lo:.3f}, {hi:.3f}])"))

    slope_check("giles:total_cost", 1.8, 2.2, "giles_total_cost_slope")
    slope_check("rmlmc:total_cost", 1.8, 2.2, "rmlmc_total_cost_slope")
    slope_check("naive:total_cost", 2 + g_over_a - 0.2, 2 + g_over_a + 0.2, "naive_total_cost_slope")
    slope_check("truncated:worst_case", g_over_a - 0.15, g_over_a + 0.15, "truncated_worst_case_slope")
    slope_check("naive:worst_case", g_over_a - 0.15, g_over_a + 0.15, "naive_worst_case_slope")
    slope_check("rmlmc:worst_case", -math.inf, rml_cap, "rmlmc_worst_case_slope")
    if int(fam.alpha) == fam.alpha:
        ok = True
        parts = []
        for e in eps_grid:
            bias, half = truncated_bias_exact(fam, e)
            ok &= bias <= half
            parts.append(f"eps={e}: |s_L-1|={bias} <= {half}")
        checks.append(Check("truncated_bias_exact", ok, "; ".join(parts)))
    for name in names:
        worst = max(summary[(name, e)]["mse"] / e**2 for e in eps_grid)
        checks.append(Check(f"{name}_mse_budget", worst <= 1.25,
                            f"max over eps of empirical MSE / eps^2 = {worst:.3f} (want <= 1.25)"))
    return checks


# ---------------------------------------------------------------------------
# tail bench


def _draw(dist: str, batch: BatchStream, index: int, pareto_gamma: float):
    if dist == "exponential":
        return -np.log(batch.uniform_at(index))
    if dist == "normal":
        return batch.normal_at(index)
    if dist == "pareto":
        return batch.uniform_at(index) ** (-1.0 / pareto_gamma)
    raise ValueError(f"unsupported distribution {dist!r}")


def simulate_maxima(dist: str, n: int, reps: int, seed: int, pareto_gamma: float = 2.0) -> np.ndarray:
    """``reps`` independent maxima of ``n`` i.i.d. draws (lane = replication)."""
    batch = BatchStream(seed, np.arange(reps), np.zeros(reps))

    def work(b):
        m = np.full(len(b), -np.inf)
        for i in range(n):
            m = np.maximum(m, _draw(dist, b, i, pareto_gamma))
        return (m,)

    return _batched(work, batch)[0]


def _models(dist, pareto_gamma):
    if dist == "exponential":
        return tails.SubExponential(nu=1.0, mean=1.0), tails.ExactExponential(1.0), 1.0
    if dist == "normal":
        return tails.SubGaussian(1.0, 0.0), tails.Normal(0.0, 1.0), 0.0
    return None, tails.RegularVarying(1.0, pareto_gamma), pareto_gamma / (pareto_gamma - 1.0) if pareto_gamma > 1 else math.inf


def run_tail_bench(config: ExperimentConfig) -> ScenarioResult:
    p = config.params
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = ScenarioResult()
    R = config.repetitions
    mean_rows, q_rows = [], []
    checks = []
    emp = {}
    for di, dist in enumerate(p["distributions"]):
        bound_model, evt_model, mean1 = _models(dist, p["pareto_gamma"])
        for ni, n in enumerate(int(x) for x in p["n_grid"]):
            mx = simulate_maxima(dist, n, R, derive_seed(config.seed, di, ni), p["pareto_gamma"])
            m = float(mx.mean())
            exact = float(np.sum(1.0 / np.arange(1, n + 1))) if dist == "exponential" else (mean1 if n == 1 else math.nan)
            bound = tails.bound_expected_max(bound_model, n) if bound_model is not None else math.nan
            holds = "" if math.isnan(bound) else str(m <= bound).lower()
            mean_rows.append((dist, n, R, m, exact, bound, holds))
            emp[(dist, n)] = (m, mx)
            if bound_model is not None:
                checks.append(Check(f"bound_{dist}_n{n}", m <= bound, f"empirical E[max]={m:.4f} <= bound {bound:.4f}"))
            for q in p["quantiles"]:
                eq = tails.empirical_max_quantile(mx, q)
                try:
                    ev = tails.evt_quantile(evt_model, n, q)
                except ValueError:
                    ev = math.nan
                q_rows.append((dist, n, q, eq, ev))
    _write_csv(out / "tail_means.csv",
               ["distribution", "n", "reps", "empirical_mean", "exact_mean", "bound", "bound_holds"], mean_rows, res)
    _write_csv(out / "tail_quantiles.csv", ["distribution", "n", "q", "empirical", "evt"], q_rows, res)

    for n in (10, 100, 1000):
        if ("exponential", n) in emp:
            h = float(np.sum(1.0 / np.arange(1, n + 1)))
            m = emp[("exponential", n)][0]
            checks.append(Check(f"exp_mean_vs_harmonic_n{n}", abs(m - h) <= 0.02 * h,
                                f"empirical {m:.4f} vs H_n {h:.4f} (want within 2%)"))
    if ("exponential", 100) in emp:
        med = tails.empirical_max_quantile(emp[("exponential", 100)][1], 0.5)
        ev = tails.evt_quantile(tails.ExactExponential(1.0), 100, 0.5)
        checks.append(Check("exp_evt_median_n100", abs(med - ev) <= 0.15, f"empirical median {med:.4f} vs EVT {ev:.4f} (want +-0.15)"))
    res.checks += checks

    panels = []
    for dist in p["distributions"]:
        ns = [int(x) for x in p["n_grid"]]
        series = {"empirical E[max]": (ns, [emp[(dist, n)][0] for n in ns])}
        bm = _models(dist, p["pareto_gamma"])[0]
        if bm is not None:
            series["bound"] = (ns, [tails.bound_expected_max(bm, n) for n in ns])
        qs = [r for r in q_rows if r[0] == dist and r[2] == 0.5 and not math.isnan(r[4])]
        if qs:
            series["EVT median"] = ([r[1] for r in qs], [r[4] for r in qs])
        panels.append((series, Axes(dist, "n", "max", logx=True)))
    emit_svg_figure(out / "tails.svg", panels)
    res.files.append(out / "tails.svg")
    return res


# ---------------------------------------------------------------------------
# farm demo


def run_farm_demo(config: ExperimentConfig) -> ScenarioResult:
    p = config.params
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = ScenarioResult()
    eps = float(p["epsilon"])
    avail = p["available_processors"]
    name = p["estimator"]
    if name == "unbiased-mcmc":
        target = mcmc.gaussian_target()
        h = mcmc.unbiased_mcmc_batch(target, _identity, 0, p["sigma"], BatchStream.for_grid(config.seed, 20000, 1))[0]
        v = float(h.var())
        plan = costsim.plan_unbiased(v, eps, avail)
        sampler, is_batch, truth = mcmc.unbiased_batch_sampler(target, _identity, 0, p["sigma"]), True, 0.0
    else:
        fam = _family(p)
        plan, sampler, is_batch, v = build_mlmc_run(name, fam, eps, avail)
        truth = fam.true_value
    ledger = run_farm_for(plan, sampler, is_batch, derive_seed(config.seed, 7))
    costsim.write_ledger_csv(ledger, out / "ledger.csv")
    costsim.write_metrics_csv(ledger, plan, out / "metrics.csv")
    res.files += [out / "ledger.csv", out / "metrics.csv"]
    value = costsim.aggregate(ledger)
    _write_csv(out / "runs.csv", ["estimator", "epsilon", "value", "cost_ticks"],
               [(name, eps, float(x), int(c)) for x, c in zip(ledger.values, ledger.costs)], res)
    mt = costsim.metrics(ledger)
    res.summary = {"plan": plan, "metrics": mt, "estimate": value, "variance_bound": v, "truth": truth}
    return res


RUNNERS = {
    "mcmc-case-study": run_mcmc_case_study,
    "mlmc-sweep": run_mlmc_sweep,
    "tail-bench": run_tail_bench,
    "farm-demo": run_farm_demo,
}
