import math

import numpy as np
import pytest
from scipy import stats

from fleetbayes.dataset import FleetDataset, simulate_fleet
from fleetbayes.hazard import HazardModel
from fleetbayes.inference import PosteriorSamples
from fleetbayes.prediction import (
    EmptyTestWarning,
    bootstrap_pll,
    population_predict,
    population_sampler,
    posterior_predictive,
    predictive_log_likelihood,
)
from fleetbayes.splines import make_basis

from conftest import QUICK_CHAINS, small_truck_scenario


def manual_samples(model, rows, lp=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    draws = rows[None, :, :]
    return PosteriorSamples(
        names=model.param_names,
        draws=draws,
        acceptance=np.full((1, rows.shape[1]), 0.4),
        log_posterior=np.zeros((1, rows.shape[0])) if lp is None else lp,
        step_sizes=np.full((1, rows.shape[1]), 0.5),
    )


def degenerate_hazard_samples(sigma=0.3, n_draws=64):
    """All draws identical: predictive spread must equal the noise."""
    basis = make_basis(0.0, 1.0, 3)
    model = HazardModel(K_per_l=(1,), basis=basis)
    vec = model.pack(model.init_params(FleetDataset((), (1,))))
    vec[-1] = sigma
    return model, manual_samples(model, np.tile(vec, (n_draws, 1)))


def test_degenerate_posterior_predictive_std_is_sigma():
    model, samples = degenerate_hazard_samples(sigma=0.37)
    xs = np.linspace(0, 1, 9)
    pred = posterior_predictive(samples, model, 1, 1, xs)
    np.testing.assert_allclose(pred.std, 0.37, atol=1e-12)
    np.testing.assert_allclose(pred.hi3 - pred.lo3, 6 * 0.37, atol=1e-12)


def test_predictive_mean_is_mean_of_per_draw_means(small_truck_fit):
    _, dataset, model, samples = small_truck_fit
    xs = np.linspace(0, 1, 5)
    pred = posterior_predictive(samples, model, 2, 1, xs)
    means = model.mean_for_draws(samples.pooled(), 2, 1, xs)
    np.testing.assert_allclose(pred.mean, means.mean(axis=0), atol=1e-12)


def test_predictive_matches_two_stage_simulation_oracle(small_truck_fit):
    _, dataset, model, samples = small_truck_fit
    xs = np.array([0.25, 0.75])
    pred = posterior_predictive(samples, model, 1, 1, xs)
    # brute force: re-draw parameters uniformly from the pooled draws,
    # then add noise; a fully independent two-stage path
    rng = np.random.default_rng(99)
    pooled = samples.pooled()
    idx = rng.integers(0, pooled.shape[0], size=40_000)
    sims = model.mean_for_draws(pooled[idx], 1, 1, xs)
    sims = sims + model.sigma_draws(pooled[idx])[:, None] * rng.standard_normal(sims.shape)
    se_mean = sims.std(axis=0) / math.sqrt(sims.shape[0])
    np.testing.assert_array_less(np.abs(pred.mean - sims.mean(axis=0)), 3 * se_mean + 1e-9)
    se_std = sims.std(axis=0) / math.sqrt(2.0 * (sims.shape[0] - 1))
    np.testing.assert_array_less(np.abs(pred.std - sims.std(axis=0)), 4 * se_std + 1e-9)


def test_empty_sample_set_rejected():
    model, samples = degenerate_hazard_samples()
    empty = PosteriorSamples(
        names=model.param_names,
        draws=np.empty((1, 0, model.dim)),
        acceptance=np.full((1, model.dim), 0.4),
        log_posterior=np.empty((1, 0)),
        step_sizes=np.full((1, model.dim), 0.5),
    )
    with pytest.raises(ValueError, match="empty"):
        posterior_predictive(empty, model, 1, 1, [0.5])


# -- predictive log-likelihood --------------------------------------------------


def test_single_draw_reduces_to_plain_logpdf():
    model, _ = degenerate_hazard_samples(sigma=0.5)
    vec = model.pack(model.init_params(FleetDataset((), (1,))))
    vec[-1] = 0.5
    samples = manual_samples(model, vec[None, :])
    x, y = 0.3, 0.1
    ds = FleetDataset.from_arrays([x], [y], [1], 1)
    mean = model.mean_for_draws(vec[None, :], 1, 1, [x])[0, 0]
    expected = stats.norm.logpdf(y, mean, 0.5)
    result = predictive_log_likelihood(samples, model, ds)
    assert result.total == pytest.approx(expected, abs=1e-10)


def test_score_at_predictive_mode():
    model, samples = degenerate_hazard_samples(sigma=0.25)
    x = 0.4
    mean = model.mean_for_draws(samples.pooled(), 1, 1, [x])[0, 0]
    ds = FleetDataset.from_arrays([x], [mean], [1], 1)
    result = predictive_log_likelihood(samples, model, ds)
    assert result.total == pytest.approx(-0.5 * math.log(2 * math.pi * 0.25**2), abs=1e-10)


def test_permutation_invariance(small_truck_fit):
    _, dataset, model, samples = small_truck_fit
    rng = np.random.default_rng(3)
    obs = [o for o in dataset.observations][:40]
    ds1 = FleetDataset(tuple(obs), dataset.K_per_l)
    perm = rng.permutation(len(obs))
    ds2 = FleetDataset(tuple(obs[i] for i in perm), dataset.K_per_l)
    r1 = predictive_log_likelihood(samples, model, ds1)
    r2 = predictive_log_likelihood(samples, model, ds2)
    assert r1.total == pytest.approx(r2.total, abs=1e-9)
    assert r1.per_task == pytest.approx(r2.per_task, abs=1e-9)


def test_empty_test_set_scores_zero_with_warning():
    model, samples = degenerate_hazard_samples()
    with pytest.warns(EmptyTestWarning):
        result = predictive_log_likelihood(samples, model, FleetDataset((), (1,)))
    assert result.total == 0.0


def test_logmeanexp_overflow_safe():
    model, samples = degenerate_hazard_samples(sigma=1e-3)
    # y is ~37 noise standard deviations away: the per-draw density
    # underflows to ~1e-300 but the score must stay finite
    x = 0.5
    mean = model.mean_for_draws(samples.pooled(), 1, 1, [x])[0, 0]
    ds = FleetDataset.from_arrays([x], [mean + 0.037], [1], 1)
    result = predictive_log_likelihood(samples, model, ds)
    assert np.isfinite(result.total)
    assert result.total < -600


# -- bootstrap -------------------------------------------------------------------


def test_identity_bootstrap_equals_plain(small_truck_fit):
    _, dataset, model, samples = small_truck_fit
    test = FleetDataset(tuple(dataset.observations[:30]), dataset.K_per_l)
    plain = predictive_log_likelihood(samples, model, test)
    boot = bootstrap_pll(samples, model, test, trials=1, seed=5, resample=False)
    assert boot.total_mean == pytest.approx(plain.total, abs=1e-9)
    for kl, v in plain.per_task.items():
        assert boot.mean_per_task[kl] == pytest.approx(v, abs=1e-9)


def test_bootstrap_seed_deterministic(small_truck_fit):
    _, dataset, model, samples = small_truck_fit
    test = FleetDataset(tuple(dataset.observations[:30]), dataset.K_per_l)
    b1 = bootstrap_pll(samples, model, test, trials=25, seed=7)
    b2 = bootstrap_pll(samples, model, test, trials=25, seed=7)
    assert b1.mean_per_task == b2.mean_per_task
    assert b1.std_per_task == b2.std_per_task


def test_bootstrap_mean_near_plain_score(small_truck_fit):
    _, dataset, model, samples = small_truck_fit
    test = FleetDataset(tuple(dataset.observations[:50]), dataset.K_per_l)
    plain = predictive_log_likelihood(samples, model, test)
    boot = bootstrap_pll(samples, model, test, trials=200, seed=8)
    assert abs(boot.total_mean - plain.total) <= 2.0 * max(boot.total_std, 1e-9)


# -- population level --------------------------------------------------------------


def test_population_collapses_when_spread_vanishes():
    basis = make_basis(0.0, 1.0, 3)
    model = HazardModel(K_per_l=(1,), basis=basis)
    vec = model.pack(model.init_params(FleetDataset((), (1,))))
    names = model.param_names
    vec[names.index("sigma_alpha[1]")] = 1e-14
    vec[names.index("sigma_alpha[2]")] = 1e-14
    vec[names.index("alpha1[1,1]")] = vec[names.index("mu_alpha[1]")]
    vec[names.index("alpha2[1,1]")] = vec[names.index("mu_alpha[2]")]
    samples = manual_samples(model, np.tile(vec, (32, 1)))
    xs = np.linspace(0, 1, 7)
    pop = population_predict(samples, model, xs, seed=4, l=1)
    task = posterior_predictive(samples, model, 1, 1, xs, seed=4)
    np.testing.assert_allclose(pop.mean, task.mean, atol=1e-10)
    np.testing.assert_allclose(pop.std, task.std, atol=1e-10)


def test_population_variance_dominates_task_variance(small_truck_fit):
    _, dataset, model, samples = small_truck_fit
    xs = np.linspace(0.1, 0.9, 5)
    pop = population_predict(samples, model, xs, seed=6, l=1)
    for k in (1, 2, 3, 4):
        task = posterior_predictive(samples, model, k, 1, xs, seed=6)
        # law of total variance, up to Monte Carlo error on the fresh effects
        assert np.all(pop.std >= task.std - 0.06)


def test_population_seed_deterministic(small_truck_fit):
    _, dataset, model, samples = small_truck_fit
    xs = np.linspace(0, 1, 4)
    p1 = population_predict(samples, model, xs, seed=11)
    p2 = population_predict(samples, model, xs, seed=11)
    np.testing.assert_array_equal(p1.draws, p2.draws)


def test_population_sampler_deterministic_and_shaped(small_truck_fit):
    _, dataset, model, samples = small_truck_fit
    sampler = population_sampler(samples, model, l=1)
    winds = np.linspace(0.1, 0.9, 100)
    out1 = sampler(winds, np.random.default_rng(3))
    out2 = sampler(winds, np.random.default_rng(3))
    assert out1.shape == (100,)
    np.testing.assert_array_equal(out1, out2)


def test_interval_coverage_on_well_specified_data():
    from dataclasses import replace

    scenario = small_truck_scenario(seed=8, sizes=(300, 0, 0, 0))
    dataset = simulate_fleet(scenario)
    model = HazardModel(K_per_l=scenario.K_per_l, basis=scenario.basis)
    samples = model.fit(dataset, QUICK_CHAINS)
    # same truths, fresh noise/x stream
    holdout = simulate_fleet(replace(scenario, seed=81, n_per_task=(2000, 0, 0, 0)))
    xs = np.array([o.x for o in holdout.observations])
    ys = np.array([o.y for o in holdout.observations])
    pred = posterior_predictive(samples, model, 1, 1, xs)
    inside = (ys >= pred.lo3) & (ys <= pred.hi3)
    assert inside.mean() >= 0.99