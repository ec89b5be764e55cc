"""Gradient-free adaptive MCMC over any log-posterior, with diagnostics.

The sampler is componentwise random-walk Metropolis.  Positive-constrained
components are proposed on the log scale with the change-of-variables term
added, so every stored draw is feasible by construction.  During burn-in
each component's step size follows a Robbins-Monro recursion toward a target
acceptance rate and is frozen afterwards, leaving a fixed transition kernel
for the retained draws.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChainConfig",
    "PosteriorSamples",
    "Diagnostics",
    "InfeasibleInitError",
    "run_mcmc",
    "diagnostics",
]

_INITIAL_STEP = 0.5
_RM_DECAY = 0.6


class InfeasibleInitError(ValueError):
    """The log posterior is -inf (or a positivity constraint fails) at the
    initialization point; start the chain from a feasible state."""


@dataclass(frozen=True)
class ChainConfig:
    """Sampler run lengths and seeding.

    init=None asks the caller (usually a model fit wrapper) for its default
    initialization, which is built from prior means; pass a vector for a
    custom start.
    """

    n_chains: int = 4
    burn_in: int = 1000
    n_samples: int = 2000
    seed: int = 0
    adapt_target: float = 0.44
    init: np.ndarray | None = None

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError(f"n_chains must be >= 1, got {self.n_chains}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 0.0 < self.adapt_target < 1.0:
            raise ValueError(f"adapt_target must be in (0, 1), got {self.adapt_target}")


@dataclass(frozen=True)
class PosteriorSamples:
    """Named multi-chain draws on the constrained (model) scale.

    draws has shape (n_chains, n_samples, dim); log_posterior holds the
    constrained-space log density of each draw; acceptance and step_sizes are
    per (chain, component).
    """

    names: list[str]
    draws: np.ndarray
    acceptance: np.ndarray
    log_posterior: np.ndarray
    step_sizes: np.ndarray

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        object.__setattr__(self, "draws", draws)
        object.__setattr__(self, "names", list(self.names))
        if draws.ndim != 3:
            raise ValueError("draws must have shape (chains, iterations, dim)")
        if draws.shape[2] != len(self.names):
            raise ValueError(
                f"{len(self.names)} names for dimension {draws.shape[2]}"
            )
        lp = np.asarray(self.log_posterior, dtype=float)
        if lp.shape != draws.shape[:2]:
            raise ValueError("log_posterior must have shape (chains, iterations)")
        if lp.size and not np.all(np.isfinite(lp)):
            raise ValueError("stored draws must have finite log posterior")
        object.__setattr__(self, "log_posterior", lp)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_samples(self) -> int:
        return self.draws.shape[1]

    @property
    def dim(self) -> int:
        return self.draws.shape[2]

    def pooled(self) -> np.ndarray:
        """All chains concatenated, shape (chains * iterations, dim)."""
        return self.draws.reshape(-1, self.dim)

    def column(self, name: str) -> np.ndarray:
        return self.pooled()[:, self.names.index(name)]

    def mean(self, name: str) -> float:
        return float(self.column(name).mean())

    def std(self, name: str) -> float:
        return float(self.column(name).std(ddof=1))

    def interval(self, name: str, prob: float = 0.95) -> tuple[float, float]:
        """Central credible interval from pooled draws."""
        tail = 0.5 * (1.0 - prob)
        col = self.column(name)
        return float(np.quantile(col, tail)), float(np.quantile(col, 1.0 - tail))

    def best_draw(self) -> np.ndarray:
        """The retained draw with the highest log posterior (MAP plug-in)."""
        c, i = np.unravel_index(int(np.argmax(self.log_posterior)), self.log_posterior.shape)
        return self.draws[c, i].copy()

    def select(self, pattern: str) -> list[str]:
        """Names matching a glob-style pattern (fnmatch semantics)."""
        import fnmatch

        return [n for n in self.names if fnmatch.fnmatch(n, pattern)]

    def to_csv(self, path) -> None:
        """One row per (chain, iteration); columns are the parameter names."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["chain", "iteration", *self.names, "log_posterior"])
            for c in range(self.n_chains):
                for i in range(self.n_samples):
                    writer.writerow(
                        [c, i, *[repr(float(v)) for v in self.draws[c, i]],
                         repr(float(self.log_posterior[c, i]))]
                    )

    @classmethod
    def from_csv(cls, path) -> "PosteriorSamples":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["chain", "iteration"] or header[-1] != "log_posterior":
                raise ValueError(f"{path}: not a draws CSV")
            names = header[2:-1]
            rows = [(int(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader]
        if not rows:
            raise ValueError(f"{path}: no draws")
        n_chains = max(r[0] for r in rows) + 1
        n_samples = max(r[1] for r in rows) + 1
        draws = np.empty((n_chains, n_samples, len(names)))
        lp = np.empty((n_chains, n_samples))
        for c, i, vals in rows:
            draws[c, i] = vals[:-1]
            lp[c, i] = vals[-1]
        return cls(
            names=names,
            draws=draws,
            acceptance=np.full((n_chains, len(names)), np.nan),
            log_posterior=lp,
            step_sizes=np.full((n_chains, len(names)), np.nan),
        )


def _run_chain(log_posterior, z0, x0, positive, config, rng, names):
    dims = z0.size
    burn_in = config.burn_in
    n_samples = config.n_samples
    target = config.adapt_target

    z = z0.copy()
    x = x0.copy()
    jac = float(z[positive].sum())
    lp_x = log_posterior(x)
    if not np.isfinite(lp_x):
        raise InfeasibleInitError(
            "log posterior is not finite at the initialization point; "
            "provide a feasible init vector"
        )
    lp = lp_x + jac

    step = np.full(dims, _INITIAL_STEP)
    draws = np.empty((n_samples, dims))
    lps = np.empty(n_samples)
    accept_count = np.zeros(dims)

    total = burn_in + n_samples
    for it in range(total):
        adapting = it < burn_in
        eps = rng.standard_normal(dims)
        logu = np.log(rng.random(dims))
        for i in range(dims):
            z_old = z[i]
            x_old = x[i]
            z_new = z_old + step[i] * eps[i]
            z[i] = z_new
            if positive[i]:
                if z_new > 700.0:  # exp would overflow; reject outright
                    lp_x_new = -np.inf
                    jac_new = jac
                else:
                    x[i] = math.exp(z_new)
                    jac_new = jac + (z_new - z_old)
                    lp_x_new = log_posterior(x)
            else:
                x[i] = z_new
                jac_new = jac
                lp_x_new = log_posterior(x)
            if math.isnan(lp_x_new):
                raise RuntimeError(
                    f"log posterior returned NaN while updating {names[i]} "
                    f"at state {x.tolist()}"
                )
            lp_new = lp_x_new + jac_new
            log_ratio = lp_new - lp
            if log_ratio >= 0.0 or logu[i] < log_ratio:
                lp = lp_new
                lp_x = lp_x_new
                jac = jac_new
                if not adapting:
                    accept_count[i] += 1
                accepted_prob = 1.0 if log_ratio >= 0 else math.exp(log_ratio)
            else:
                z[i] = z_old
                x[i] = x_old
                accepted_prob = 0.0 if log_ratio == -np.inf else min(1.0, math.exp(log_ratio))
            if adapting:
                gamma = (it + 1.0) ** -_RM_DECAY
                step[i] *= math.exp(gamma * (accepted_prob - target))
        if not adapting:
            j = it - burn_in
            draws[j] = x
            lps[j] = lp_x
    return draws, lps, accept_count / n_samples, step


def run_mcmc(log_posterior, dims: int, config: ChainConfig, positive=None,
             init=None, names=None) -> PosteriorSamples:
    """Sample a log posterior with componentwise adaptive Metropolis.

    Parameters
    ----------
    log_posterior : callable
        Maps a length-dims vector (constrained scale) to a float; -inf marks
        infeasible states.
    positive : bool array, optional
        Components sampled on the log scale (with the Jacobian term added).
    init : array, optional
        Initialization on the constrained scale.  Falls back to config.init,
        then to zeros (ones for positive components).
    """
    dims = int(dims)
    positive = (
        np.zeros(dims, dtype=bool) if positive is None
        else np.asarray(positive, dtype=bool)
    )
    if positive.shape != (dims,):
        raise ValueError("positive mask must have one entry per dimension")
    if names is None:
        names = [f"p{i}" for i in range(dims)]
    if len(names) != dims:
        raise ValueError(f"{len(names)} names for {dims} dimensions")

    if init is None:
        init = config.init
    if init is None:
        init = np.where(positive, 1.0, 0.0)
    init = np.asarray(init, dtype=float)
    if init.shape != (dims,):
        raise ValueError(f"init must have shape ({dims},), got {init.shape}")
    bad = positive & (init <= 0)
    if np.any(bad):
        offenders = [names[i] for i in np.flatnonzero(bad)]
        raise InfeasibleInitError(
            f"positive-constrained components initialized at <= 0: {offenders}"
        )

    seeds = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    all_draws = []
    all_lps = []
    all_acc = []
    all_steps = []
    for c in range(config.n_chains):
        rng = np.random.default_rng(seeds[c])
        x0 = init.copy()
        if c > 0:
            # jitter later chains by 1%, shrinking until feasible
            scale = 0.01
            for _ in range(50):
                trial = init * (1.0 + scale * rng.standard_normal(dims))
                trial[positive & (trial <= 0)] = init[positive & (trial <= 0)]
                if np.isfinite(log_posterior(trial)):
                    x0 = trial
                    break
                scale *= 0.5
        z0 = np.where(positive, np.log(np.where(positive, x0, 1.0)), x0)
        draws, lps, acc, steps = _run_chain(
            log_posterior, z0, x0, positive, config, rng, names
        )
        all_draws.append(draws)
        all_lps.append(lps)
        all_acc.append(acc)
        all_steps.append(steps)

    return PosteriorSamples(
        names=list(names),
        draws=np.stack(all_draws),
        acceptance=np.stack(all_acc),
        log_posterior=np.stack(all_lps),
        step_sizes=np.stack(all_steps),
    )


@dataclass(frozen=True)
class Diagnostics:
    """Split-chain potential scale reduction and effective sample sizes."""

    names: list[str]
    rhat: np.ndarray
    ess: np.ndarray
    acceptance: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def max_rhat(self) -> float:
        finite = self.rhat[np.isfinite(self.rhat)]
        if finite.size == 0:
            return float("nan")
        return float(finite.max())

    def to_dict(self) -> dict:
        def clean(v):
            return None if not np.isfinite(v) else float(v)

        return {
            "rhat": {n: clean(v) for n, v in zip(self.names, self.rhat)},
            "ess": {n: clean(v) for n, v in zip(self.names, self.ess)},
            "acceptance": {n: float(v) for n, v in zip(self.names, self.acceptance)},
            "warnings": list(self.warnings),
        }


def _split_chains(draws: np.ndarray) -> np.ndarray:
    """(C, I, D) -> (2C, I//2, D), dropping the middle draw when I is odd."""
    c, i, d = draws.shape
    half = i // 2
    return np.concatenate([draws[:, :half], draws[:, i - half:]], axis=0)


def _rhat_split(seq: np.ndarray) -> float:
    """Potential scale reduction over sequences of shape (M, n)."""
    m, n = seq.shape
    means = seq.mean(axis=1)
    w = float(seq.var(axis=1, ddof=1).mean())
    b = n * float(means.var(ddof=1))
    if w == 0.0:
        return float("inf") if b > 0 else float("nan")
    var_plus = (n - 1) / n * w + b / n
    # floor at 1: sampling noise can push the ratio marginally below
    return max(1.0, float(np.sqrt(var_plus / w)))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of a 1-D series via FFT."""
    n = x.size
    xc = x - x.mean()
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real
    return acov / n


def _ess_split(seq: np.ndarray) -> float:
    """Autocorrelation-based effective sample size over (M, n) sequences."""
    m, n = seq.shape
    if n < 4:
        return float("nan")
    w = float(seq.var(axis=1, ddof=1).mean())
    b = n * float(seq.mean(axis=1).var(ddof=1)) if m > 1 else 0.0
    var_plus = (n - 1) / n * w + b / n
    if var_plus == 0.0:
        return 0.0
    acov = np.stack([_autocovariance(seq[j]) for j in range(m)])
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer initial monotone positive sequence
    tau = 0.0
    prev_pair = np.inf
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev_pair)
        tau += pair
        prev_pair = pair
        t += 2
    ess = m * n / (1.0 + 2.0 * tau)
    return float(min(ess, m * n))


def diagnostics(samples: PosteriorSamples) -> Diagnostics:
    """Split-chain R-hat and effective sample size per dimension.

    R-hat needs at least 2 chains and 4 draws per chain; with a single chain
    it is reported as NaN (unavailable) while ESS is still computed.  A
    zero-variance dimension is flagged and given ESS 0 rather than
    propagating NaNs.
    """
    draws = samples.draws
    c, i, d = draws.shape
    warnings_list: list[str] = []
    rhat = np.full(d, np.nan)
    ess = np.full(d, np.nan)

    can_rhat = c >= 2 and i >= 4
    if not can_rhat:
        warnings_list.append("R-hat unavailable: need >= 2 chains and >= 4 draws per chain")
    split = _split_chains(draws) if i >= 2 else draws

    for j in range(d):
        seq = split[:, :, j]
        if np.all(seq == seq.flat[0]):
            ess[j] = 0.0
            warnings_list.append(f"{samples.names[j]}: degenerate (constant) draws, ESS = 0")
            continue
        if can_rhat:
            r = _rhat_split(seq)
            rhat[j] = r
            if np.isinf(r):
                warnings_list.append(
                    f"{samples.names[j]}: divergent chains (between-chain variance "
                    "dominates, R-hat = inf)"
                )
            elif np.isnan(r):
                warnings_list.append(f"{samples.names[j]}: zero variance in every chain")
        e = _ess_split(seq)
        if e == 0.0:
            warnings_list.append(f"{samples.names[j]}: degenerate (constant) draws, ESS = 0")
        ess[j] = e

    return Diagnostics(
        names=list(samples.names),
        rhat=rhat,
        ess=ess,
        acceptance=samples.acceptance.mean(axis=0),
        warnings=warnings_list,
    )
