import csv
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from parmc.costsim import DomainError
from parmc.experiments import cli
from parmc.experiments.config import ConfigError, load_config
from parmc.experiments.fit import fit_linear, fit_loglog
from parmc.experiments.scenarios import (
    RUNNERS,
    build_mlmc_run,
    simulate_maxima,
    truncated_bias_exact,
)
from parmc.experiments.svg import Axes, emit_svg_figure, emit_svg_plot, pixel_to_data
from parmc.mlmc import synthetic_family
from parmc.rng import Stream

SVG = "{http://www.w3.org/2000/svg}"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- fitting ---------------------------------------------------------------


def test_fit_loglog_exact_power():
    xs = np.arange(1, 11, dtype=float)
    fr = fit_loglog(xs, xs**2)
    assert fr.slope == pytest.approx(2) and fr.r_squared == pytest.approx(1)
    assert fit_loglog(xs, np.full(10, 3.0)).slope == pytest.approx(0, abs=1e-12)


def test_fit_loglog_noisy():
    xs = np.geomspace(1, 1000, 20)
    noise = np.exp(0.01 * Stream(3).normals(20))
    assert fit_loglog(xs, 3 * xs**1.5 * noise).slope == pytest.approx(1.5, abs=0.05)


def test_fit_errors():
    with pytest.raises(DomainError):
        fit_loglog([1, 2], [1, 2])
    with pytest.raises(DomainError):
        fit_loglog([1, 2, 3], [1, 0, 2])
    with pytest.raises(DomainError):
        fit_linear([1, 1, 1], [1, 2, 3])


# --- svg -------------------------------------------------------------------


def test_single_series_one_polyline(tmp_path):
    emit_svg_plot(tmp_path / "a.svg", {"s": ([1, 2], [3, 4])})
    root = ET.parse(tmp_path / "a.svg").getroot()
    assert root.get("version") == "1.1"
    assert len(root.findall(f".//{SVG}polyline")) == 1


def test_log_axis_rejects_zero(tmp_path):
    with pytest.raises(DomainError):
        emit_svg_plot(tmp_path / "b.svg", {"s": ([1, 2], [0, 4])}, Axes(logy=True))


def test_svg_is_deterministic(tmp_path):
    panels = [({"a": ([1, 10, 100], [5, 2, 1])}, Axes("t", "x", "y", logx=True, logy=True))]
    emit_svg_figure(tmp_path / "1.svg", panels)
    emit_svg_figure(tmp_path / "2.svg", panels)
    assert (tmp_path / "1.svg").read_bytes() == (tmp_path / "2.svg").read_bytes()


def _parse_back(path):
    """(panel attrs, {series: [(x, y), ...]}) for every panel."""
    out = []
    for g in ET.parse(path).getroot().iter(f"{SVG}g"):
        series = {}
        for pl in g.findall(f"{SVG}polyline"):
            pts = [tuple(map(float, p.split(","))) for p in pl.get("points").split()]
            series[pl.get("data-series")] = [pixel_to_data(px, py, g.attrib) for px, py in pts]
        for c in g.findall(f"{SVG}circle"):
            series[c.get("data-series")] = [pixel_to_data(float(c.get("cx")), float(c.get("cy")), g.attrib)]
        out.append((g.attrib, series))
    return out


# --- config ----------------------------------------------------------------


def test_config_defaults_and_overrides(tmp_path):
    cfg = load_config("mcmc-case-study")
    assert cfg.seed == 1 and cfg.repetitions == 100 and cfg["sigma"] == 2.38
    assert cfg["M_grid"][-1] == 100000
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"sigma": 1.5, "M_grid": [1, 10]}))
    cfg = load_config("mcmc-case-study", p, seed=9, repetitions=3)
    assert (cfg.seed, cfg.repetitions, cfg["sigma"], cfg["M_grid"]) == (9, 3, 1.5, [1, 10])


@pytest.mark.parametrize(
    "scenario,payload",
    [
        ("mcmc-case-study", {"M_grid": [10, 1]}),
        ("mcmc-case-study", {"M_grid": []}),
        ("mcmc-case-study", {"bogus": 1}),
        ("mlmc-sweep", {"beta": 1, "gamma": 2}),
        ("mlmc-sweep", {"estimators": ["magic"]}),
        ("tail-bench", {"distributions": ["cauchy"]}),
        ("farm-demo", {"epsilon": -1}),
    ],
)
def test_config_errors(tmp_path, scenario, payload):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(payload))
    with pytest.raises(ConfigError):
        load_config(scenario, p)


def test_config_rejects_bad_repetitions():
    with pytest.raises(ConfigError):
        load_config("tail-bench", repetitions=0)
    with pytest.raises(ConfigError):
        load_config("nope")


# --- cli -------------------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["tail-bench", "--config", str(bad)]) == 2
    assert cli.main(["tail-bench", "--reps", "0"]) == 2
    good = tmp_path / "t.json"
    good.write_text(json.dumps({"n_grid": [1, 10], "distributions": ["exponential"]}))
    assert cli.main(["tail-bench", "--config", str(good), "--reps", "200", "--out", str(tmp_path / "o")]) == 0
    # an impossible check: too few reps for the 2% harmonic-number tolerance at n=10
    assert cli.main(["tail-bench", "--config", str(good), "--reps", "3", "--seed", "2",
                     "--out", str(tmp_path / "p"), "--check"]) == 3
    assert "[FAIL]" in capsys.readouterr().out


# --- scenarios ---------------------------------------------------------------


@pytest.fixture(scope="module")
def small_case(tmp_path_factory):
    out = tmp_path_factory.mktemp("case")
    cfg = load_config("mcmc-case-study", repetitions=3, output_dir=out,
                      M_grid=[1, 10, 100, 1000], N_grid=[10, 100], runs_csv_limit=50)
    return cfg, RUNNERS["mcmc-case-study"](cfg)


def test_case_study_outputs(small_case):
    cfg, res = small_case
    out = cfg.output_dir
    fig1 = read_csv(out / "fig1.csv")
    assert list(fig1[0]) == ["M", "T", "err2"] and len(fig1) == 4
    fig2 = read_csv(out / "fig2.csv")
    assert list(fig2[0]) == ["method", "N", "M", "err2", "completion"]
    assert len(fig2) == 4 + 2 * 4
    assert len(read_csv(out / "fig1_reps.csv")) == 3 * 4
    runs = read_csv(out / "runs.csv")
    assert len(runs) == 50 * 3
    taus = read_csv(out / "taus.csv")
    assert sum(int(r["count"]) for r in taus) == 3 * 1000


def test_case_study_m1_is_single_run_error(small_case):
    cfg, _ = small_case
    reps = read_csv(cfg.output_dir / "fig1_reps.csv")
    first = read_csv(cfg.output_dir / "runs.csv")[0]
    row = next(r for r in reps if r["rep"] == "0" and r["M"] == "1")
    assert float(row["err2"]) == float(first["value"]) ** 2
    assert float(row["T"]) == int(first["cost_ticks"])


def test_case_study_figures_parse_back(small_case):
    cfg, _ = small_case
    fig1 = read_csv(cfg.output_dir / "fig1.csv")
    M = [float(r["M"]) for r in fig1]
    T = [float(r["T"]) for r in fig1]
    E = [float(r["err2"]) for r in fig1]
    panels = _parse_back(cfg.output_dir / "fig1.svg")
    assert len(panels) == 4
    expected = [(M, T), (T, E), (M, E), (M, E)]
    for (attrs, series), (xs, ys) in zip(panels, expected):
        pts = next(iter(series.values()))
        assert len(pts) == len(xs)
        for (px, py), x, y in zip(pts, xs, ys):
            assert px == pytest.approx(x, rel=2e-2, abs=1e-2)
            assert py == pytest.approx(y, rel=2e-2, abs=1e-2)
    fig2 = _parse_back(cfg.output_dir / "fig2.svg")
    assert len(fig2) == 3


def test_mlmc_plans_and_exact_bias():
    fam = synthetic_family(1, 2, 1)
    plan, _, _, v = build_mlmc_run("rmlmc", fam, 0.1)
    assert plan.m_eps == math.ceil(v / 0.01)
    for eps in (0.2, 0.1, 0.05, 0.025):
        bias, half = truncated_bias_exact(fam, eps)
        assert bias <= half


def test_mlmc_sweep_outputs(tmp_path):
    cfg = load_config("mlmc-sweep", repetitions=4, output_dir=tmp_path, eps_grid=[0.1, 0.2])
    RUNNERS["mlmc-sweep"](cfg)
    rows = read_csv(tmp_path / "mlmc.csv")
    assert list(rows[0]) == ["estimator", "epsilon", "rep", "value", "cost_ticks",
                             "worst_case", "average", "m_eps", "n_eps"]
    assert len(rows) == 4 * 2 * 4
    assert (tmp_path / "mlmc_slopes.csv").exists()


def test_tail_bench_n1_mean_and_rows(tmp_path):
    cfg = load_config("tail-bench", repetitions=20_000, output_dir=tmp_path, n_grid=[1, 10])
    RUNNERS["tail-bench"](cfg)
    means = {(r["distribution"], r["n"]): float(r["empirical_mean"]) for r in read_csv(tmp_path / "tail_means.csv")}
    assert means[("exponential", "1")] == pytest.approx(1.0, abs=0.03)
    assert means[("normal", "1")] == pytest.approx(0.0, abs=0.03)
    assert len(read_csv(tmp_path / "tail_quantiles.csv")) == 3 * 2 * 3


def test_pareto_median_matches_frechet():
    mx = simulate_maxima("pareto", 100, 10_000, seed=4, pareto_gamma=2.0)
    assert np.median(mx) == pytest.approx(10 / math.sqrt(math.log(2)), rel=0.05)


def test_farm_demo_outputs(tmp_path):
    cfg = load_config("farm-demo", output_dir=tmp_path)
    res = RUNNERS["farm-demo"](cfg)
    ledger = read_csv(tmp_path / "ledger.csv")
    assert len(ledger) == res.summary["plan"].replications
    m = read_csv(tmp_path / "metrics.csv")[0]
    assert int(m["total_cost"]) == sum(int(r["cost_ticks"]) for r in ledger)


def test_scenarios_reproducible(tmp_path):
    for tag in ("a", "b"):
        cfg = load_config("mcmc-case-study", repetitions=2, output_dir=tmp_path / tag,
                          M_grid=[1, 10, 100], N_grid=[10])
        RUNNERS["mcmc-case-study"](cfg)
    for name in ("fig1.csv", "fig2.csv", "runs.csv", "fig1.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
