"""Uniform-knot cubic B-spline bases and data-driven selection of the basis size.

The basis is built from the classic piecewise cubic bump: each function is
non-zero on exactly four consecutive knot segments, so design matrices are
sparse and the family forms a partition of unity wherever four functions
overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SplineBasis",
    "make_basis",
    "eval_basis",
    "design_matrix",
    "select_H",
    "SelectHScore",
]


@dataclass(frozen=True)
class SplineBasis:
    """A family of H uniform cubic B-splines covering [x_lo, x_hi].

    Knots are spaced delta = (x_hi - x_lo) / (H + 1) apart and extend one
    segment beyond each end of the interval, so knot j sits at
    x_lo + (j - 1) * delta for j = 0..H+3.  Basis function h (1-based) is
    supported on (knots[h-1], knots[h+3]).
    """

    H: int
    x_lo: float
    x_hi: float
    delta: float = field(init=False)
    knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.H < 1:
            raise ValueError(f"basis size must be >= 1, got H={self.H}")
        if not (self.x_lo < self.x_hi):
            raise ValueError(
                f"degenerate interval: x_lo={self.x_lo} must be < x_hi={self.x_hi}"
            )
        delta = (self.x_hi - self.x_lo) / (self.H + 1)
        knots = self.x_lo + (np.arange(self.H + 4) - 1.0) * delta
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "knots", knots)

    def support(self, h: int) -> tuple[float, float]:
        """Support interval (4 knot segments) of basis function h (1-based)."""
        if not 1 <= h <= self.H:
            raise ValueError(f"basis index h={h} outside 1..{self.H}")
        return float(self.knots[h - 1]), float(self.knots[h + 3])


def make_basis(x_lo: float, x_hi: float, H: int) -> SplineBasis:
    """Build a uniform cubic B-spline basis of size H over [x_lo, x_hi]."""
    return SplineBasis(H=int(H), x_lo=float(x_lo), x_hi=float(x_hi))


def _bump(v: np.ndarray) -> np.ndarray:
    """Cubic B-spline bump on local segment coordinate v in [0, 4).

    Piecewise polynomial per segment, with u the offset into the segment:
    u^3/6, (1+3u+3u^2-3u^3)/6, (4-6u^2+3u^3)/6, (1-3u+3u^2-u^3)/6.
    """
    out = np.zeros_like(v, dtype=float)

    m = (v >= 0.0) & (v < 1.0)
    u = v[m]
    out[m] = u**3 / 6.0

    m = (v >= 1.0) & (v < 2.0)
    u = v[m] - 1.0
    out[m] = (1.0 + 3.0 * u + 3.0 * u**2 - 3.0 * u**3) / 6.0

    m = (v >= 2.0) & (v < 3.0)
    u = v[m] - 2.0
    out[m] = (4.0 - 6.0 * u**2 + 3.0 * u**3) / 6.0

    m = (v >= 3.0) & (v < 4.0)
    u = v[m] - 3.0
    out[m] = (1.0 - 3.0 * u + 3.0 * u**2 - u**3) / 6.0

    return out


def eval_basis(basis: SplineBasis, x: float) -> np.ndarray:
    """Evaluate all H basis functions at a scalar x (zeros outside support)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    # global segment coordinate relative to knot 0, shifted per function
    s = (x - basis.knots[0]) / basis.delta
    v = s - np.arange(basis.H, dtype=float)
    return _bump(v)


def design_matrix(basis: SplineBasis, xs) -> np.ndarray:
    """N x H matrix whose rows are eval_basis at each x; at most 4 non-zeros per row."""
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size and not np.all(np.isfinite(xs)):
        raise ValueError("design_matrix inputs must be finite")
    if xs.size == 0:
        return np.zeros((0, basis.H))
    s = (xs - basis.knots[0]) / basis.delta
    v = s[:, None] - np.arange(basis.H, dtype=float)[None, :]
    return _bump(v)


@dataclass(frozen=True)
class SelectHScore:
    """Cross-validation score row for one candidate basis size."""

    H: int
    mean_bic: float
    std_bic: float


def _fold_indices(n: int, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    perm = rng.permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, folds)]


def select_H(
    dataset,
    candidates,
    folds: int,
    seed: int,
    chain_config=None,
    x_range: tuple[float, float] | None = None,
):
    """Pick the basis size by K-fold cross-validation on the most data-rich task.

    For each candidate H the single-task hazard model is refit once per fold
    (on that fold's training portion) and scored with the information
    criterion d*ln(n) - 2*ln(Lhat), where Lhat is the fit-data likelihood at
    the best (highest posterior) retained draw, d the parameter count, and n
    the number of fitted observations.  The candidate minimising the mean
    score over folds wins; ties break toward smaller H.

    Returns (H_best, [SelectHScore per candidate]).
    """
    # local imports: model/inference layers sit above this module
    from .dataset import FleetDataset
    from .hazard import HazardHyperPriors, single_task_model
    from .inference import ChainConfig, run_mcmc

    candidates = [int(H) for H in candidates]
    if not candidates:
        raise ValueError("need at least one candidate H")
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")

    counts = dataset.counts()
    if not counts:
        raise ValueError("dataset is empty")
    # most data-rich task; ties toward smallest (l, k)
    (k_star, l_star) = min(counts, key=lambda kl: (-counts[kl], kl[1], kl[0]))
    task = dataset.task_subset(k_star, l_star)
    xs = np.array([o.x for o in task.observations])
    ys = np.array([o.y for o in task.observations])
    n = xs.size
    if folds > n:
        raise ValueError(f"folds={folds} exceeds task size N={n}")

    if x_range is None:
        x_range = (float(xs.min()), float(xs.max()))
    if chain_config is None:
        chain_config = ChainConfig(n_chains=1, burn_in=200, n_samples=200, seed=seed)

    rng = np.random.default_rng(seed)
    fold_idx = _fold_indices(n, folds, rng)

    if len(candidates) == 1:
        H = candidates[0]
        return H, [SelectHScore(H=H, mean_bic=float("nan"), std_bic=float("nan"))]

    scores = []
    for H in candidates:
        basis = make_basis(x_range[0], x_range[1], H)
        model = single_task_model(basis, HazardHyperPriors())
        bics = []
        for f, held in enumerate(fold_idx):
            train_mask = np.ones(n, dtype=bool)
            train_mask[held] = False
            n_fit = int(train_mask.sum())
            train = FleetDataset.from_arrays(
                xs[train_mask], ys[train_mask], np.ones(n_fit, dtype=int), 1
            )
            cfg = ChainConfig(
                n_chains=chain_config.n_chains,
                burn_in=chain_config.burn_in,
                n_samples=chain_config.n_samples,
                seed=int(np.random.SeedSequence([seed, H, f]).generate_state(1)[0]),
                adapt_target=chain_config.adapt_target,
            )
            samples = run_mcmc(
                model.log_posterior_fn(train),
                model.dim,
                cfg,
                positive=model.positive_mask,
                init=model.init_vector(train),
                names=model.param_names,
            )
            params = model.unpack(samples.best_draw())
            llhat = model.log_likelihood(params, train)
            bics.append(model.dim * math.log(n_fit) - 2.0 * llhat)
        bics = np.asarray(bics)
        scores.append(SelectHScore(H=H, mean_bic=float(bics.mean()), std_bic=float(bics.std())))

    best = min(scores, key=lambda s: (s.mean_bic, s.H))
    return best.H, scores
