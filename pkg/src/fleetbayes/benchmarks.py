"""Comparison strategies: single-task learning, complete pooling, and
correlation-aligned domain adaptation, scored under one predictive protocol.

All methods consume the same train/test split and the same per-task bootstrap
streams, so reported score differences come from the inference strategy, not
the evaluation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import FleetDataset, Observation, SplitSpec, split_train_test
from .hazard import HazardModel
from .hazard import single_task_model as hazard_single_task
from .inference import ChainConfig, PosteriorSamples
from .powercurve import PowerModel
from .powercurve import single_task_model as power_single_task
from .prediction import BootstrapResult, bootstrap_pll

__all__ = [
    "CompareConfig",
    "CompareResult",
    "EmptyTaskWarning",
    "fit_stl",
    "fit_cp",
    "fit_crl",
    "coral_transform",
    "compare",
]

METHODS = ("CP", "CRL", "STL", "MTL")


class EmptyTaskWarning(UserWarning):
    """A task had no training data and was skipped by a per-task fit."""


def _task_seed(seed: int, k: int, l: int) -> int:
    return int(np.random.SeedSequence([seed, l, k]).generate_state(1)[0])


def _single_task_like(model, l: int):
    """The single-task (fixed-hyper) layout matching a fleet model's family."""
    if isinstance(model, HazardModel):
        return hazard_single_task(model.basis, model.hyper)
    if isinstance(model, PowerModel):
        return power_single_task(l, model.hyper)
    raise TypeError(f"unsupported model family: {type(model).__name__}")


def fit_stl(dataset: FleetDataset, model, config: ChainConfig) -> dict:
    """Fit each task independently (un-tied layout, frozen hypers).

    Returns {(k, l): PosteriorSamples}; tasks without training observations
    are skipped with a warning.
    """
    fits = {}
    for (k, l) in dataset.tasks():
        task_data = dataset.task_subset(k, l)
        if task_data.n == 0:
            warnings.warn(f"task (k={k}, l={l}) has no training data; skipped",
                          EmptyTaskWarning)
            continue
        stl_model = _single_task_like(model, l)
        cfg = replace(config, seed=_task_seed(config.seed, k, l), init=None)
        fits[(k, l)] = stl_model.fit(task_data, cfg)
    return fits


def fit_cp(dataset: FleetDataset, model, config: ChainConfig) -> PosteriorSamples:
    """Complete pooling: collapse all tasks to one and fit a single model.

    Uses task (1, 1)'s chain seed, so a one-task dataset gives a pooled fit
    bit-identical to that task's independent fit.
    """
    if dataset.n == 0:
        raise ValueError("cannot pool an empty dataset")
    pooled = dataset.pooled()
    cp_model = _single_task_like(model, 1)
    cfg = replace(config, seed=_task_seed(config.seed, 1, 1), init=None)
    return cp_model.fit(pooled, cfg)


def coral_transform(source, target, eps: float = 1e-6) -> np.ndarray:
    """Align a source sample's (x, y) second-order statistics to a target's.

    Centers the source, whitens by the inverse square root of
    (source covariance + eps*I), recolors by the square root of
    (target covariance + eps*I), and re-centers at the target mean.
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    source = np.asarray(source, dtype=float).reshape(-1, 2)
    target = np.asarray(target, dtype=float).reshape(-1, 2)
    if target.shape[0] < 2:
        raise ValueError("target needs at least 2 points")
    if source.shape[0] == 0:
        return source.copy()

    def _reg_cov(pts):
        if pts.shape[0] < 2:
            cov = np.zeros((2, 2))
        else:
            cov = np.cov(pts, rowvar=False)
        return cov + eps * np.eye(2)

    def _sqrt_and_inv(mat):
        vals, vecs = np.linalg.eigh(mat)
        if np.any(vals <= 0):
            raise np.linalg.LinAlgError(
                f"covariance not positive definite beyond eps={eps} repair"
            )
        root = (vecs * np.sqrt(vals)) @ vecs.T
        inv_root = (vecs / np.sqrt(vals)) @ vecs.T
        return root, inv_root

    _, src_inv_root = _sqrt_and_inv(_reg_cov(source))
    tgt_root, _ = _sqrt_and_inv(_reg_cov(target))
    centered = source - source.mean(axis=0)
    return centered @ src_inv_root @ tgt_root + target.mean(axis=0)


def fit_crl(dataset: FleetDataset, target: tuple[int, int], model,
            config: ChainConfig, eps: float = 1e-6) -> PosteriorSamples:
    """Correlation-aligned learning for one target task.

    Every other task's (x, y) pairs are aligned onto the target's joint
    distribution, pooled with the target's own data, and a single model is
    fit.  Predictions are only meaningful for the target.
    """
    k_t, l_t = target
    target_data = dataset.task_subset(k_t, l_t)
    if target_data.n < 2:
        raise ValueError(
            f"target task (k={k_t}, l={l_t}) needs >= 2 training points, "
            f"has {target_data.n}"
        )
    tgt_pairs = np.array([[o.x, o.y] for o in target_data.observations])

    obs = [Observation(float(p[0]), float(p[1]), 1, 1) for p in tgt_pairs]
    for (k, l) in dataset.tasks():
        if (k, l) == target:
            continue
        src = np.array(
            [[o.x, o.y] for o in dataset.observations if o.k == k and o.l == l]
        )
        if src.size == 0:
            continue
        moved = coral_transform(src, tgt_pairs, eps=eps)
        obs.extend(Observation(float(p[0]), float(p[1]), 1, 1) for p in moved)

    adapted = FleetDataset(tuple(obs), (1,), transform=dataset.transform)
    crl_model = _single_task_like(model, l_t)
    cfg = replace(config, seed=_task_seed(config.seed, k_t, l_t), init=None)
    return crl_model.fit(adapted, cfg)


@dataclass(frozen=True)
class _AnyTaskView:
    """Adapter that serves every (k, l) from a single-task model's lone task."""

    model: object

    def mean_for_draws(self, draws, k, l, xs):
        return self.model.mean_for_draws(draws, 1, 1, xs)

    def sigma_draws(self, draws):
        return self.model.sigma_draws(draws)


@dataclass(frozen=True)
class CompareConfig:
    """Everything a method comparison shares: split, chains, scoring."""

    split: SplitSpec
    chains: ChainConfig
    trials: int = 100
    eps: float = 1e-6
    bootstrap_seed: int = 0


@dataclass(frozen=True)
class CompareResult:
    """Score table over methods and tasks, plus the fitted samples."""

    rows: list            # (method, k, l, score)
    totals: dict          # method -> total score over its scored tasks
    per_task: dict        # method -> {(k, l): score}
    train: FleetDataset
    test: FleetDataset
    mtl_samples: PosteriorSamples
    stl_samples: dict
    cp_samples: PosteriorSamples
    crl_samples: dict
    mtl_model: object
    stl_models: dict


def compare(dataset: FleetDataset, model, config: CompareConfig) -> CompareResult:
    """Fit CP, CRL, STL, and MTL on one split and score them identically.

    Scores are bootstrap-aggregated out-of-sample predictive log-likelihoods;
    tasks without test data are not scored (a task too small to split
    contributes training data only).
    """
    train, test = split_train_test(dataset, config.split)

    mtl_samples = model.fit(train, config.chains)
    stl_samples = fit_stl(train, model, config.chains)
    cp_samples = fit_cp(train, model, config.chains)
    cp_model = _single_task_like(model, 1)

    crl_samples = {}
    for (k, l) in dataset.tasks():
        if train.task_subset(k, l).n < 2 or test.task_subset(k, l).n == 0:
            continue
        crl_samples[(k, l)] = fit_crl(train, (k, l), model, config.chains, eps=config.eps)

    stl_models = {kl: _single_task_like(model, kl[1]) for kl in stl_samples}

    per_task: dict = {m: {} for m in METHODS}
    mtl_scores = bootstrap_pll(
        mtl_samples, model, test, trials=config.trials, seed=config.bootstrap_seed
    )
    per_task["MTL"] = dict(mtl_scores.mean_per_task)

    for (k, l) in test.tasks():
        obs = tuple(o for o in test.observations if o.k == k and o.l == l)
        if not obs:
            continue
        # keep original (k, l) labels so every method draws the same
        # per-task bootstrap stream
        task_test = FleetDataset(obs, test.K_per_l)

        def _score(samples, the_model) -> float:
            result = bootstrap_pll(
                samples, _AnyTaskView(the_model), task_test,
                trials=config.trials, seed=config.bootstrap_seed,
            )
            return result.mean_per_task[(k, l)]

        if (k, l) in stl_samples:
            per_task["STL"][(k, l)] = _score(stl_samples[(k, l)], stl_models[(k, l)])
        per_task["CP"][(k, l)] = _score(cp_samples, cp_model)
        if (k, l) in crl_samples:
            per_task["CRL"][(k, l)] = _score(crl_samples[(k, l)], _single_task_like(model, l))

    rows = []
    totals = {}
    for method in METHODS:
        scored = per_task[method]
        for (k, l) in sorted(scored, key=lambda kl: (kl[1], kl[0])):
            rows.append((method, k, l, scored[(k, l)]))
        totals[method] = float(sum(scored.values()))
    return CompareResult(
        rows=rows,
        totals=totals,
        per_task=per_task,
        train=train,
        test=test,
        mtl_samples=mtl_samples,
        stl_samples=stl_samples,
        cp_samples=cp_samples,
        crl_samples=crl_samples,
        mtl_model=model,
        stl_models=stl_models,
    )
