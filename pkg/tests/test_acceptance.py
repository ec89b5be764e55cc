"""Acceptance suite: every criterion prints one PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  All checks use bundled
seeded synthetic scenarios; the heavy fits are shared through session
fixtures so the suite stays inside its runtime budgets.
"""

import json
import math
import time
import warnings
from dataclasses import replace

import numpy as np
import pytest
import yaml
from scipy import stats

import fleetbayes as fb
from fleetbayes.analysis import variance_reduction
from fleetbayes.benchmarks import CompareConfig, compare, coral_transform, fit_stl
from fleetbayes.cli import main as cli_main
from fleetbayes.decision import UtilityTable, vopi
from fleetbayes.prediction import bootstrap_pll
from fleetbayes.scenarios import model_for_scenario, truck_default, truck_two_group, wind_default
from fleetbayes.splines import design_matrix, make_basis, select_H

warnings.filterwarnings("ignore", category=fb.dataset.SplitWarning)

DEFAULT_CHAINS = fb.ChainConfig(n_chains=4, burn_in=1000, n_samples=2000, seed=0)


def report(num: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


# -- shared heavy fits ---------------------------------------------------------


@pytest.fixture(scope="session")
def truck_compare():
    scenario = truck_default(seed=4)
    dataset = fb.simulate_fleet(scenario)
    model = model_for_scenario(scenario)
    config = CompareConfig(
        split=fb.SplitSpec(0.75, "random", 11),
        chains=replace(DEFAULT_CHAINS, seed=21),
        trials=100,
        bootstrap_seed=9,
    )
    return scenario, compare(dataset, model, config)


@pytest.fixture(scope="session")
def wind_fits():
    scenario = wind_default(seed=3)
    dataset = fb.simulate_fleet(scenario)
    model = model_for_scenario(scenario)
    t0 = time.perf_counter()
    mtl = model.fit(dataset, replace(DEFAULT_CHAINS, seed=77))
    elapsed = time.perf_counter() - t0
    stl = fit_stl(dataset, model, replace(DEFAULT_CHAINS, seed=78))
    return scenario, dataset, model, mtl, stl, elapsed


# -- criteria -------------------------------------------------------------------


def test_criterion_1_spline_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    basis = make_basis(0.0, 1.0, 5)

    def brute(x):
        out = np.zeros(basis.H)
        for h in range(1, basis.H + 1):
            knots = basis.knots[h - 1: h + 4]
            for j in range(4):
                if knots[j] <= x < knots[j + 1]:
                    u = (x - knots[j]) / basis.delta
                    out[h - 1] = (
                        u**3 / 6.0,
                        (1 + 3 * u + 3 * u**2 - 3 * u**3) / 6.0,
                        (4 - 6 * u**2 + 3 * u**3) / 6.0,
                        (1 - 3 * u + 3 * u**2 - u**3) / 6.0,
                    )[j]
        return out

    xs = rng.uniform(-0.5, 1.5, size=10_000)
    fast = design_matrix(basis, xs)
    max_err = max(
        float(np.max(np.abs(fast[i] - brute(x)))) for i, x in enumerate(xs)
    )
    interior = rng.uniform(basis.knots[3], basis.knots[basis.H], size=10_000)
    unity_err = float(np.max(np.abs(design_matrix(basis, interior).sum(axis=1) - 1.0)))
    elapsed = time.perf_counter() - t0
    report(
        1,
        max_err < 1e-12 and unity_err < 1e-12 and elapsed < 1.0,
        f"oracle max err {max_err:.2e}, unity err {unity_err:.2e}, {elapsed:.2f}s",
    )


def test_criterion_2_conjugate_oracle():
    t0 = time.perf_counter()
    mu0, tau0, s = 5.0, 2.0, 1.5
    rng = np.random.default_rng(123)
    y = rng.normal(4.2, s, size=12)
    n = y.size
    post_var = 1.0 / (1.0 / tau0**2 + n / s**2)
    post_mean = post_var * (mu0 / tau0**2 + y.sum() / s**2)

    def lp(v):
        m = v[0]
        return -0.5 * ((m - mu0) / tau0) ** 2 - 0.5 * float(np.sum((y - m) ** 2)) / s**2

    samples = fb.run_mcmc(lp, 1, replace(DEFAULT_CHAINS, seed=2), init=np.array([mu0]))
    pooled = samples.pooled()[:, 0]
    diag = fb.diagnostics(samples)
    mean_err = abs(pooled.mean() - post_mean) / abs(post_mean)
    var_err = abs(pooled.var(ddof=1) - post_var) / post_var
    elapsed = time.perf_counter() - t0
    report(
        2,
        mean_err <= 0.02 and var_err <= 0.02 and diag.max_rhat() < 1.05 and elapsed < 10.0,
        f"mean err {mean_err:.2%}, var err {var_err:.2%}, "
        f"R-hat {diag.max_rhat():.3f}, {elapsed:.1f}s",
    )


def test_criterion_3_truck_parameter_recovery():
    t0 = time.perf_counter()
    inside = total = 0
    for seed in range(10):
        scenario = truck_default(seed=seed)
        dataset = fb.simulate_fleet(scenario)
        model = model_for_scenario(scenario)
        samples = model.fit(dataset, replace(DEFAULT_CHAINS, seed=1000 + seed))
        for t, (k, l) in enumerate(dataset.tasks()):
            for j, base in enumerate(("alpha1", "alpha2")):
                lo, hi = samples.interval(f"{base}[{k},{l}]", 0.95)
                total += 1
                inside += int(lo <= scenario.alpha[t, j] <= hi)
        lo, hi = samples.interval("sigma", 0.95)
        total += 1
        inside += int(lo <= scenario.noise_std <= hi)
    elapsed = time.perf_counter() - t0
    coverage = inside / total
    report(
        3,
        coverage >= 0.90 and elapsed < 300.0,
        f"coverage {inside}/{total} = {coverage:.1%} over 10 seeds, {elapsed:.0f}s",
    )


def test_criterion_4_transfer_direction(truck_compare):
    _, result = truck_compare
    totals = result.totals
    ok = (
        totals["MTL"] > totals["STL"]
        and totals["CP"] < totals["STL"]
        and totals["CP"] < totals["MTL"]
    )
    report(
        4, ok,
        "totals " + ", ".join(f"{m}={totals[m]:.1f}" for m in ("CP", "CRL", "STL", "MTL")),
    )


def test_criterion_5_variance_reduction(truck_compare):
    scenario, result = truck_compare
    reduction = variance_reduction(result.stl_samples, result.mtl_samples, "alpha*")
    sparse = [r for r in reduction.rows if r.k >= 5]
    slopes = np.mean([r.reduction_pct for r in sparse if r.name.startswith("alpha2")])
    intercepts = np.mean([r.reduction_pct for r in sparse if r.name.startswith("alpha1")])
    report(
        5,
        slopes > 30.0 and intercepts > 30.0,
        f"sparse-task posterior-std reduction: slopes {slopes:.0f}%, "
        f"intercepts {intercepts:.0f}% (threshold 30%)",
    )


def test_criterion_6_two_level_grouping():
    scenario = truck_two_group(seed=2)
    dataset = fb.simulate_fleet(scenario)
    train, test = fb.split_train_test(dataset, fb.SplitSpec(0.75, "random", 31))
    grouped_model = model_for_scenario(scenario)
    tied_model = grouped_model.single_group()
    cfg = replace(DEFAULT_CHAINS, seed=41)
    grouped = grouped_model.fit(train, cfg)
    tied = tied_model.fit(train.relabel_single_group(), cfg)
    pll_grouped = bootstrap_pll(grouped, grouped_model, test, trials=100, seed=13).total_mean
    pll_tied = bootstrap_pll(
        tied, tied_model, test.relabel_single_group(), trials=100, seed=13
    ).total_mean
    report(
        6,
        pll_grouped > pll_tied,
        f"held-out PLL: group-tied {pll_grouped:.1f} vs fully-tied {pll_tied:.1f}",
    )


def test_criterion_7_wind_parameter_recovery(wind_fits):
    scenario, dataset, model, mtl, _, fit_seconds = wind_fits
    p_err = abs(mtl.mean("p") - scenario.p)
    pm_errs = [abs(mtl.mean(f"Pm[{l}]") - scenario.Pm[l - 1]) for l in (1, 2)]
    draws = mtl.pooled()
    names = mtl.names
    q_cols = [names.index(n) for n in names if n.startswith("q[")]
    r_cols = [names.index(n) for n in names if n.startswith("r[")]
    p_col = draws[:, names.index("p")][:, None]
    ordering = bool(
        np.all((draws[:, q_cols] > p_col) & (draws[:, q_cols] < draws[:, r_cols]))
    )
    report(
        7,
        p_err < 0.05 and max(pm_errs) < 0.05 and ordering and fit_seconds < 300.0,
        f"p err {p_err:.3f}, Pm errs {pm_errs[0]:.3f}/{pm_errs[1]:.3f}, "
        f"ordering in all draws: {ordering}, fit {fit_seconds:.0f}s",
    )


def test_criterion_8_max_power_pooling(wind_fits):
    scenario, dataset, model, mtl, stl, _ = wind_fits
    counts = dataset.counts()
    curtailed = [(k, l) for (k, l) in dataset.tasks() if l == 2]
    sparsest = min(curtailed, key=lambda kl: counts[kl])
    mtl_std = mtl.std("Pm[2]")
    stl_std = stl[sparsest].std("Pm[1]")
    report(
        8,
        mtl_std < stl_std,
        f"std(Pm curtailed): MTL {mtl_std:.4f} < STL(sparsest {sparsest}) {stl_std:.4f}",
    )


def test_criterion_9_coral():
    rng = np.random.default_rng(202)
    eps = 1e-9
    src = rng.multivariate_normal([0.0, 0.0], [[3.0, -1.0], [-1.0, 2.0]], size=600)
    tgt = rng.multivariate_normal([5.0, 1.0], [[0.5, 0.2], [0.2, 0.8]], size=400)
    moved = coral_transform(src, tgt, eps=eps)
    cov_err = float(np.max(np.abs(
        np.cov(moved, rowvar=False) - np.cov(tgt, rowvar=False) - eps * np.eye(2)
    )))
    same = coral_transform(tgt, tgt, eps=eps)
    ident_err = float(np.max(np.abs(same - tgt)))
    report(
        9,
        cov_err < 1e-8 and ident_err < 1e-6,
        f"covariance identity err {cov_err:.2e}, self-transform err {ident_err:.2e}",
    )


def test_criterion_10_model_selection():
    t0 = time.perf_counter()
    wins = 0
    for seed in range(10):
        scenario = truck_default(seed=seed)
        dataset = fb.simulate_fleet(scenario)
        H_best, _ = select_H(
            dataset, range(2, 9), folds=20, seed=500 + seed, x_range=(0.0, 1.0)
        )
        wins += int(H_best == 5)
    elapsed = time.perf_counter() - t0
    report(
        10,
        wins >= 8 and elapsed < 600.0,
        f"recovered H=5 on {wins}/10 seeds, {elapsed:.0f}s",
    )


def test_criterion_11_decision_analysis():
    table = UtilityTable.default()

    def wind(n, rng):
        return rng.choice([0.2, 0.9], size=n)

    def power(winds, rng):
        return np.where(np.asarray(winds) >= 0.5, 1.0, 0.1)

    result = vopi(power, wind, table, n_outer=100_000, n_inner=1, seed=5)
    se = max(result.se_preposterior, 1e-12)
    toy_ok = (
        abs(result.preposterior_mean - 0.375) <= 3 * se
        and abs(result.vopi - 0.375) <= 3 * se
        and result.prior_utilities[0] == 0.0
    )

    def noisy_power(winds, rng):
        return np.asarray(winds) + rng.normal(0.0, 0.2, np.size(winds))

    point = vopi(noisy_power, 0.55, table, n_outer=400, n_inner=50, seed=6)
    beta = vopi(noisy_power, fb.WindPrior(), table, n_outer=2000, n_inner=50, seed=7)
    report(
        11,
        toy_ok and point.vopi == 0.0 and beta.preposterior_mean >= beta.prior_optimal,
        f"toy VoPI {result.vopi:.4f} (enum 0.375, 3se {3 * se:.4f}); "
        f"point-mass VoPI {point.vopi}; preposterior-prior gap {beta.vopi:.4f}",
    )


def test_criterion_12_cli_determinism(tmp_path):
    truck_cfg = tmp_path / "truck.yaml"
    truck_cfg.write_text(yaml.safe_dump(dict(
        seed=1,
        scenario={"preset": "truck_default", "seed": 1,
                  "sizes": [40, 25, 8, 4], "noise_std": 0.15},
        model={"family": "truck_hazard", "H": 5, "x_lo": 0.0, "x_hi": 1.0},
        chains={"n_chains": 2, "burn_in": 120, "n_samples": 150, "seed": 5},
        split={"fraction": 0.75, "mode": "random", "seed": 2},
        benchmark={"trials": 20, "seed": 3},
        predict={"grid": 9},
        analysis={"selector": "alpha*"},
    )))
    wind_cfg = tmp_path / "wind.yaml"
    wind_cfg.write_text(yaml.safe_dump(dict(
        seed=1,
        scenario={"preset": "wind_default", "seed": 4, "noise_std": 0.05},
        model={"family": "wind_power"},
        chains={"n_chains": 2, "burn_in": 120, "n_samples": 150, "seed": 5},
        decision={"condition": 1, "n_mc": 3000, "n_outer": 200, "n_inner": 30,
                  "seed": 6},
    )))

    def run_all(out):
        out.mkdir()
        t = str(truck_cfg)
        w = str(wind_cfg)
        data = str(out / "dataset.csv")
        assert cli_main(["simulate", "--config", t, "--out", str(out)]) == 0
        assert cli_main(["fit", "--config", t, "--data", data, "--out", str(out)]) == 0
        assert cli_main(["predict", "--config", t, "--data", data, "--out", str(out)]) == 0
        assert cli_main(["benchmark", "--config", t, "--data", data, "--out", str(out)]) == 0
        assert cli_main(["analyze", "--config", t, "--out", str(out)]) == 0
        wout = out / "wind"
        wout.mkdir()
        wdata = str(wout / "dataset.csv")
        assert cli_main(["simulate", "--config", w, "--out", str(wout)]) == 0
        assert cli_main(["fit", "--config", w, "--data", wdata, "--out", str(wout)]) == 0
        assert cli_main(["decide", "--config", w, "--out", str(wout)]) == 0

    run_all(tmp_path / "a")
    run_all(tmp_path / "b")
    files = [
        "dataset.csv", "truth.csv", "draws.csv", "diagnostics.json",
        "predictive.csv", "benchmark.csv", "benchmark_totals.json",
        "variance_reduction.csv", "correlation.csv",
        "wind/dataset.csv", "wind/draws.csv", "wind/decision.json",
        "wind/decision_histogram.csv",
    ]
    mismatched = [
        f for f in files
        if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()
    ]
    report(
        12,
        not mismatched,
        "all CLI outputs byte-identical on rerun"
        if not mismatched else f"mismatched: {mismatched}",
    )
