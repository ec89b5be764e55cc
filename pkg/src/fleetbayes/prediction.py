"""Posterior-predictive distributions and predictive log-likelihood scoring.

Predictive moments are computed analytically from the draws (mean of
per-draw means; variance = spread of means plus mean noise variance), while
raw predictive draws add sampled Gaussian noise.  Scores use the log of the
Monte-Carlo-averaged density (log-mean-exp over draws), which is
overflow-safe for extreme observations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dataset import FleetDataset
from .densities import LOG_2PI
from .inference import PosteriorSamples

__all__ = [
    "PredictiveResult",
    "PllResult",
    "BootstrapResult",
    "posterior_predictive",
    "predictive_log_likelihood",
    "bootstrap_pll",
    "population_predict",
    "population_sampler",
    "EmptyTestWarning",
]


class EmptyTestWarning(UserWarning):
    """Scoring was requested against an empty test set."""


@dataclass(frozen=True)
class PredictiveResult:
    """Pointwise predictive summary over an x grid."""

    xs: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    draws: np.ndarray          # (S, len(xs)) noisy predictive draws
    rejection_rate: float = 0.0

    @property
    def lo3(self) -> np.ndarray:
        return self.mean - 3.0 * self.std

    @property
    def hi3(self) -> np.ndarray:
        return self.mean + 3.0 * self.std


def _aggregate(xs, means, sigmas, rng, rejection_rate=0.0) -> PredictiveResult:
    noise = sigmas[:, None] * rng.standard_normal(means.shape)
    var = means.var(axis=0) + np.mean(sigmas**2)
    return PredictiveResult(
        xs=xs,
        mean=means.mean(axis=0),
        std=np.sqrt(var),
        draws=means + noise,
        rejection_rate=rejection_rate,
    )


def posterior_predictive(samples: PosteriorSamples, model, k: int, l: int, xs,
                         seed: int = 0) -> PredictiveResult:
    """Task-level predictive at each x: per-draw model mean plus that draw's noise."""
    if samples.pooled().shape[0] == 0:
        raise ValueError("empty sample set")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    draws = samples.pooled()
    means = model.mean_for_draws(draws, k, l, xs)
    sigmas = model.sigma_draws(draws)
    rng = np.random.default_rng(seed)
    return _aggregate(xs, means, sigmas, rng)


@dataclass(frozen=True)
class PllResult:
    """Predictive log-likelihood scores, summed per task."""

    per_task: dict
    total: float


def _per_observation_scores(samples: PosteriorSamples, model,
                            testset: FleetDataset) -> dict:
    """Per-task arrays of per-observation log predictive densities."""
    draws = samples.pooled()
    sigmas = model.sigma_draws(draws)
    log_s = np.log(draws.shape[0])
    out = {}
    for (k, l) in testset.tasks():
        obs = [o for o in testset.observations if o.k == k and o.l == l]
        if not obs:
            continue
        x = np.array([o.x for o in obs])
        y = np.array([o.y for o in obs])
        means = model.mean_for_draws(draws, k, l, x)      # (S, n)
        z = (y[None, :] - means) / sigmas[:, None]
        logpdf = -0.5 * z * z - np.log(sigmas)[:, None] - 0.5 * LOG_2PI
        out[(k, l)] = logsumexp(logpdf, axis=0) - log_s   # (n,)
    return out


def predictive_log_likelihood(samples: PosteriorSamples, model,
                              testset: FleetDataset) -> PllResult:
    """Log of the draw-averaged Gaussian density, summed per task and overall."""
    if testset.n == 0:
        warnings.warn("empty test set; predictive log-likelihood is 0", EmptyTestWarning)
        return PllResult(per_task={}, total=0.0)
    scores = _per_observation_scores(samples, model, testset)
    per_task = {kl: float(v.sum()) for kl, v in scores.items()}
    return PllResult(per_task=per_task, total=float(sum(per_task.values())))


@dataclass(frozen=True)
class BootstrapResult:
    """Bootstrap-aggregated predictive log-likelihood (within-task resampling)."""

    mean_per_task: dict
    std_per_task: dict
    total_mean: float
    total_std: float
    trials: int


def bootstrap_pll(samples: PosteriorSamples, model, testset: FleetDataset,
                  trials: int = 100, seed: int = 0, resample: bool = True) -> BootstrapResult:
    """Average the per-task score over bootstrap resamples of the test set.

    Resampling is within task so per-task scores stay comparable; the
    per-(k,l) resampling streams depend only on (seed, k, l), making scores
    comparable across methods run with the same seed.  resample=False scores
    the identity bootstrap (every trial is the plain test set).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if testset.n == 0:
        warnings.warn("empty test set; predictive log-likelihood is 0", EmptyTestWarning)
        return BootstrapResult({}, {}, 0.0, 0.0, trials)
    scores = _per_observation_scores(samples, model, testset)
    mean_per_task = {}
    std_per_task = {}
    for (k, l), obs_scores in sorted(scores.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        n = obs_scores.size
        if resample:
            rng = np.random.default_rng(np.random.SeedSequence([seed, l, k]))
            idx = rng.integers(0, n, size=(trials, n))
            trial_scores = obs_scores[idx].sum(axis=1)
        else:
            trial_scores = np.full(trials, obs_scores.sum())
        mean_per_task[(k, l)] = float(trial_scores.mean())
        std_per_task[(k, l)] = float(trial_scores.std(ddof=1)) if trials > 1 else 0.0
    totals = np.array(list(mean_per_task.values()))
    total_std = float(np.sqrt(sum(v**2 for v in std_per_task.values())))
    return BootstrapResult(
        mean_per_task=mean_per_task,
        std_per_task=std_per_task,
        total_mean=float(totals.sum()),
        total_std=total_std,
        trials=trials,
    )


def population_predict(samples: PosteriorSamples, model, xs, seed: int = 0,
                       l: int = 1) -> PredictiveResult:
    """Predictive for a fresh, unidentified task of group/condition l.

    Per posterior draw, new task-level effects are sampled from the
    generating distributions implied by that draw's hyper-parameters
    (rejecting infeasible orderings), the model mean is evaluated, and the
    draw's noise is added.
    """
    if samples.pooled().shape[0] == 0:
        raise ValueError("empty sample set")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    draws = samples.pooled()
    rng = np.random.default_rng(seed)
    means, rejection = model.population_mean_for_draws(draws, l, xs, rng)
    sigmas = model.sigma_draws(draws)
    return _aggregate(xs, means, sigmas, rng, rejection_rate=rejection)


def population_sampler(samples: PosteriorSamples, model, l: int = 1):
    """Callable (x_draws, rng) -> power/response draws at the population level.

    Each input value is paired with a random posterior draw and freshly
    sampled task effects, then observation noise is added; suitable as the
    predictive engine of downstream decision analyses.
    """
    pooled = samples.pooled()
    if pooled.shape[0] == 0:
        raise ValueError("empty sample set")
    sigmas_all = model.sigma_draws(pooled)

    def sampler(x_draws, rng) -> np.ndarray:
        x_draws = np.atleast_1d(np.asarray(x_draws, dtype=float))
        idx = rng.integers(0, pooled.shape[0], size=x_draws.size)
        means = model.population_point_means(pooled[idx], l, x_draws, rng)
        return means + sigmas_all[idx] * rng.standard_normal(x_draws.size)

    return sampler
