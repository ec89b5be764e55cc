"""Segmented wind-turbine power curve with hierarchical mixed effects.

The curve is zero below the cut-in speed p, ramps linearly to the onset of
the power limit at q, ramps again to the rated speed r, and is flat at the
maximum power Pm beyond.  The second slope is not a free parameter: it is
fixed by continuity, m2 = (Pm - m1 (q - p)) / (r - q).  The cut-in speed is
tied across the whole farm, the maximum power is tied per operating
condition l, and the change points and first slope are partially pooled
across all tasks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import FleetDataset, segmented_power_mean
from .densities import LOG_2PI, invgamma_logpdf, invgamma_mode, normal_logpdf

__all__ = [
    "PowerHyperPriors",
    "PowerParams",
    "PowerModel",
    "single_task_model",
    "independent_variant",
    "power_mean",
    "log_prior",
    "log_likelihood",
]


@dataclass(frozen=True)
class PowerHyperPriors:
    """Prior constants; Gaussian second arguments are variances.

    Change points get a shared inverse-gamma deviation sigma_cp; the maximum
    power per condition is anchored at unit output for normal operation and
    an 80% limit for curtailed operation.  The noise scale reuses the
    inverse-gamma(3, 0.8) prior (mode 0.2).
    """

    mu_p: tuple[float, float] = (0.2, 0.5)
    mu_q: tuple[float, float] = (0.4, 0.5)
    mu_r: tuple[float, float] = (0.6, 0.5)
    cp_shape: float = 1.0
    cp_scale: float = 1.0
    mu_m1: tuple[float, float] = (2.5, 0.5)
    m1_shape: float = 1.0
    m1_scale: float = 1.0
    pm_means: tuple[float, ...] = (1.0, 0.8)
    pm_var: float = 0.1
    noise_shape: float = 3.0
    noise_scale: float = 0.8

    def pm_mean(self, l: int) -> float:
        if not 1 <= l <= len(self.pm_means):
            raise ValueError(
                f"no maximum-power prior mean for group l={l}; "
                f"pm_means has {len(self.pm_means)} entries"
            )
        return self.pm_means[l - 1]

    @property
    def fixed_sigma_cp(self) -> float:
        return invgamma_mode(self.cp_shape, self.cp_scale)

    @property
    def fixed_sigma_m1(self) -> float:
        return invgamma_mode(self.m1_shape, self.m1_scale)

    @property
    def noise_mode(self) -> float:
        return invgamma_mode(self.noise_shape, self.noise_scale)


@dataclass(frozen=True)
class PowerParams:
    """Full latent state; q, r, m1 are flattened l-major over tasks."""

    K_per_l: tuple[int, ...]
    p: float                 # tied cut-in speed
    q: np.ndarray            # (n_tasks,) limit-onset change point
    r: np.ndarray            # (n_tasks,) rated speed
    m1: np.ndarray           # (n_tasks,) first slope
    Pm: np.ndarray           # (L,) maximum power per condition
    mu_p: float
    mu_q: float
    mu_r: float
    sigma_cp: float
    mu_m1: float
    sigma_m1: float
    sigma: float             # tied noise std

    def __post_init__(self):
        n_tasks = int(sum(self.K_per_l))
        L = len(self.K_per_l)
        q = np.asarray(self.q, dtype=float)
        r = np.asarray(self.r, dtype=float)
        m1 = np.asarray(self.m1, dtype=float)
        Pm = np.asarray(self.Pm, dtype=float)
        if q.shape != (n_tasks,) or r.shape != (n_tasks,) or m1.shape != (n_tasks,):
            raise ValueError(f"q, r, m1 must each have {n_tasks} entries")
        if Pm.shape != (L,):
            raise ValueError(f"Pm must have {L} entries, got {Pm.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "m1", m1)
        object.__setattr__(self, "Pm", Pm)
        for name in ("p", "mu_p", "mu_q", "mu_r", "sigma_cp", "mu_m1", "sigma_m1", "sigma"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def task_index(self, k: int, l: int) -> int:
        L = len(self.K_per_l)
        if not 1 <= l <= L:
            raise IndexError(f"group l={l} outside 1..{L}")
        if not 1 <= k <= self.K_per_l[l - 1]:
            raise IndexError(f"task k={k} outside 1..{self.K_per_l[l - 1]} in group l={l}")
        return int(sum(self.K_per_l[: l - 1]) + (k - 1))

    def ordering_ok(self) -> bool:
        return bool(np.all(self.p < self.q) and np.all(self.q < self.r))


def power_mean(params: PowerParams, k: int, l: int, x):
    """Segmented power curve for task (k, l); raises if p < q < r is violated."""
    t = params.task_index(k, l)
    xs = np.asarray(x, dtype=float)
    out = segmented_power_mean(
        np.atleast_1d(xs), params.p, float(params.q[t]), float(params.r[t]),
        float(params.m1[t]), float(params.Pm[l - 1]),
    ).reshape(xs.shape)
    return float(out) if np.isscalar(x) else out


def log_prior(params: PowerParams, hyper: PowerHyperPriors) -> float:
    """Log-density of the prior hierarchy; -inf outside the feasible region."""
    L = len(params.K_per_l)
    if L > len(hyper.pm_means):
        raise ValueError(f"{L} groups but only {len(hyper.pm_means)} maximum-power priors")
    if params.sigma_cp <= 0 or params.sigma_m1 <= 0 or params.sigma <= 0:
        return -np.inf
    if not params.ordering_ok():
        return -np.inf
    lp = float(normal_logpdf(params.p, params.mu_p, params.sigma_cp))
    lp += float(np.sum(normal_logpdf(params.q, params.mu_q, params.sigma_cp)))
    lp += float(np.sum(normal_logpdf(params.r, params.mu_r, params.sigma_cp)))
    lp += float(np.sum(normal_logpdf(params.m1, params.mu_m1, params.sigma_m1)))
    lp += float(normal_logpdf(params.mu_p, hyper.mu_p[0], np.sqrt(hyper.mu_p[1])))
    lp += float(normal_logpdf(params.mu_q, hyper.mu_q[0], np.sqrt(hyper.mu_q[1])))
    lp += float(normal_logpdf(params.mu_r, hyper.mu_r[0], np.sqrt(hyper.mu_r[1])))
    lp += float(normal_logpdf(params.mu_m1, hyper.mu_m1[0], np.sqrt(hyper.mu_m1[1])))
    lp += float(invgamma_logpdf(params.sigma_cp, hyper.cp_shape, hyper.cp_scale))
    lp += float(invgamma_logpdf(params.sigma_m1, hyper.m1_shape, hyper.m1_scale))
    pm_means = np.asarray(hyper.pm_means[:L], dtype=float)
    lp += float(np.sum(normal_logpdf(params.Pm, pm_means, np.sqrt(hyper.pm_var))))
    lp += float(invgamma_logpdf(params.sigma, hyper.noise_shape, hyper.noise_scale))
    return lp


def _layout_arrays(dataset: FleetDataset, K_per_l: tuple[int, ...]):
    offsets = np.concatenate([[0], np.cumsum(K_per_l)[:-1]]).astype(int)
    L = len(K_per_l)
    x = np.empty(dataset.n)
    y = np.empty(dataset.n)
    t = np.empty(dataset.n, dtype=int)
    g = np.empty(dataset.n, dtype=int)
    for i, o in enumerate(dataset.observations):
        if o.l > L or o.k > K_per_l[o.l - 1]:
            raise IndexError(f"observation (k={o.k}, l={o.l}) outside model layout {K_per_l}")
        x[i] = o.x
        y[i] = o.y
        t[i] = offsets[o.l - 1] + o.k - 1
        g[i] = o.l - 1
    return x, y, t, g


def _segmented_mean_all(x, t, g, p, q, r, m1, Pm):
    """Vectorized curve mean for all observations at once."""
    q_o = q[t]
    r_o = r[t]
    m1_o = m1[t]
    pm_o = Pm[g]
    m2_o = (pm_o - m1_o * (q_o - p)) / (r_o - q_o)
    mean = np.zeros_like(x)
    seg1 = (x >= p) & (x < q_o)
    seg2 = (x >= q_o) & (x < r_o)
    seg3 = x >= r_o
    mean[seg1] = m1_o[seg1] * (x[seg1] - p)
    mean[seg2] = m2_o[seg2] * (x[seg2] - q_o[seg2]) + m1_o[seg2] * (q_o[seg2] - p)
    mean[seg3] = pm_o[seg3]
    return mean


def log_likelihood(params: PowerParams, dataset: FleetDataset) -> float:
    """Gaussian log-likelihood of the power observations."""
    if dataset.n == 0:
        return 0.0
    if not params.ordering_ok():
        raise ValueError("change-point ordering p < q < r violated")
    x, y, t, g = _layout_arrays(dataset, params.K_per_l)
    mean = _segmented_mean_all(x, t, g, params.p, params.q, params.r, params.m1, params.Pm)
    z = (y - mean) / params.sigma
    return float(-0.5 * z @ z - y.size * (np.log(params.sigma) + 0.5 * LOG_2PI))


@dataclass(frozen=True)
class PowerModel:
    """Packing, densities, and prediction for one power-curve parameterization.

    sample_hypers=False freezes the pooled hyper-parameters at their prior
    means/modes and unties the cut-in speed; it is the single-task layout.
    """

    K_per_l: tuple[int, ...]
    hyper: PowerHyperPriors = field(default_factory=PowerHyperPriors)
    sample_hypers: bool = True

    def __post_init__(self):
        object.__setattr__(self, "K_per_l", tuple(int(k) for k in self.K_per_l))
        if self.n_tasks < 1:
            raise ValueError("model needs at least one task")
        if self.L > len(self.hyper.pm_means):
            raise ValueError(
                f"{self.L} groups but only {len(self.hyper.pm_means)} maximum-power priors"
            )
        if not self.sample_hypers and self.n_tasks != 1:
            raise ValueError("fixed-hyper layout is single-task only")

    @property
    def L(self) -> int:
        return len(self.K_per_l)

    @property
    def n_tasks(self) -> int:
        return int(sum(self.K_per_l))

    @property
    def dim(self) -> int:
        base = 1 + 3 * self.n_tasks + self.L + 1  # p, (q,r,m1) per task, Pm, sigma
        return base + (6 if self.sample_hypers else 0)

    @property
    def param_names(self) -> list[str]:
        names = ["p"]
        tasks = [
            (k, l)
            for l in range(1, self.L + 1)
            for k in range(1, self.K_per_l[l - 1] + 1)
        ]
        names += [f"q[{k},{l}]" for k, l in tasks]
        names += [f"r[{k},{l}]" for k, l in tasks]
        names += [f"m1[{k},{l}]" for k, l in tasks]
        names += [f"Pm[{l}]" for l in range(1, self.L + 1)]
        if self.sample_hypers:
            names += ["mu_p", "mu_q", "mu_r", "sigma_cp", "mu_m1", "sigma_m1"]
        names.append("sigma")
        return names

    @property
    def positive_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        if self.sample_hypers:
            names = self.param_names
            mask[names.index("sigma_cp")] = True
            mask[names.index("sigma_m1")] = True
        mask[-1] = True  # sigma
        return mask

    def _slices(self):
        nt = self.n_tasks
        i = 1
        s_q = slice(i, i + nt); i += nt
        s_r = slice(i, i + nt); i += nt
        s_m1 = slice(i, i + nt); i += nt
        s_pm = slice(i, i + self.L); i += self.L
        if self.sample_hypers:
            s_hyp = slice(i, i + 6); i += 6
        else:
            s_hyp = None
        return s_q, s_r, s_m1, s_pm, s_hyp, i

    def pack(self, params: PowerParams) -> np.ndarray:
        hyp = (
            [params.mu_p, params.mu_q, params.mu_r, params.sigma_cp, params.mu_m1, params.sigma_m1]
            if self.sample_hypers
            else []
        )
        vec = np.concatenate([[params.p], params.q, params.r, params.m1, params.Pm,
                              hyp, [params.sigma]])
        assert vec.size == self.dim
        return vec

    def unpack(self, vec: np.ndarray) -> PowerParams:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got {vec.shape}")
        s_q, s_r, s_m1, s_pm, s_hyp, s_sigma = self._slices()
        if self.sample_hypers:
            mu_p, mu_q, mu_r, sigma_cp, mu_m1, sigma_m1 = vec[s_hyp]
        else:
            hyper = self.hyper
            mu_p, mu_q, mu_r = hyper.mu_p[0], hyper.mu_q[0], hyper.mu_r[0]
            sigma_cp = hyper.fixed_sigma_cp
            mu_m1, sigma_m1 = hyper.mu_m1[0], hyper.fixed_sigma_m1
        return PowerParams(
            K_per_l=self.K_per_l,
            p=vec[0], q=vec[s_q], r=vec[s_r], m1=vec[s_m1], Pm=vec[s_pm],
            mu_p=mu_p, mu_q=mu_q, mu_r=mu_r, sigma_cp=sigma_cp,
            mu_m1=mu_m1, sigma_m1=sigma_m1, sigma=vec[s_sigma],
        )

    # -- densities -----------------------------------------------------------

    def log_prior(self, params: PowerParams) -> float:
        if self.sample_hypers:
            return log_prior(params, self.hyper)
        hyper = self.hyper
        if params.sigma <= 0:
            return -np.inf
        if not params.ordering_ok():
            return -np.inf
        lp = float(normal_logpdf(params.p, hyper.mu_p[0], hyper.fixed_sigma_cp))
        lp += float(np.sum(normal_logpdf(params.q, hyper.mu_q[0], hyper.fixed_sigma_cp)))
        lp += float(np.sum(normal_logpdf(params.r, hyper.mu_r[0], hyper.fixed_sigma_cp)))
        lp += float(np.sum(normal_logpdf(params.m1, hyper.mu_m1[0], hyper.fixed_sigma_m1)))
        pm_means = np.asarray([self.hyper.pm_mean(l) for l in range(1, self.L + 1)])
        lp += float(np.sum(normal_logpdf(params.Pm, pm_means, np.sqrt(hyper.pm_var))))
        lp += float(invgamma_logpdf(params.sigma, hyper.noise_shape, hyper.noise_scale))
        return lp

    def log_likelihood(self, params: PowerParams, dataset: FleetDataset) -> float:
        return log_likelihood(params, dataset)

    def predict_mean(self, params: PowerParams, k: int, l: int, x):
        return power_mean(params, k, l, x)

    def log_posterior_fn(self, dataset: FleetDataset):
        """Fast closure vec -> log prior + log likelihood over prepared arrays.

        Hand-fused equivalent of log_prior + log_likelihood (the readable
        module-level functions are the reference; tests pin the two paths
        together).
        """
        import math

        x, y, t, g = _layout_arrays(dataset, self.K_per_l)
        n = y.size
        nt = self.n_tasks
        s_q, s_r, s_m1, s_pm, s_hyp, s_sigma = self._slices()
        hyper = self.hyper
        L = self.L
        pm_means = np.asarray(hyper.pm_means[:L], dtype=float)
        pm_sd = math.sqrt(hyper.pm_var)
        mu_p0, sp = hyper.mu_p[0], math.sqrt(hyper.mu_p[1])
        mu_q0, sq = hyper.mu_q[0], math.sqrt(hyper.mu_q[1])
        mu_r0, sr = hyper.mu_r[0], math.sqrt(hyper.mu_r[1])
        mu_m10, sm = hyper.mu_m1[0], math.sqrt(hyper.mu_m1[1])
        fixed_cp = hyper.fixed_sigma_cp
        fixed_m1 = hyper.fixed_sigma_m1
        sample_hypers = self.sample_hypers
        c_ig_cp = hyper.cp_shape * math.log(hyper.cp_scale) - math.lgamma(hyper.cp_shape)
        c_ig_m1 = hyper.m1_shape * math.log(hyper.m1_scale) - math.lgamma(hyper.m1_shape)
        ns, nsc = hyper.noise_shape, hyper.noise_scale
        c_ig_noise = ns * math.log(nsc) - math.lgamma(ns)
        half_l2pi = 0.5 * LOG_2PI
        i_hyp = s_hyp.start if sample_hypers else 0

        def _norm_sum(dev: np.ndarray, sd: float) -> float:
            # sum of Gaussian logpdfs with common sd over a deviation vector
            return (
                -0.5 * float(dev @ dev) / (sd * sd)
                - dev.size * (math.log(sd) + half_l2pi)
            )

        def logpost(vec: np.ndarray) -> float:
            sigma = vec[s_sigma]
            if sigma <= 0:
                return -np.inf
            p = vec[0]
            q = vec[s_q]
            r = vec[s_r]
            m1 = vec[s_m1]
            Pm = vec[s_pm]
            if p >= q.min() or np.any(q >= r):
                return -np.inf
            if sample_hypers:
                mu_p = vec[i_hyp]
                mu_q = vec[i_hyp + 1]
                mu_r = vec[i_hyp + 2]
                sigma_cp = vec[i_hyp + 3]
                mu_m1 = vec[i_hyp + 4]
                sigma_m1 = vec[i_hyp + 5]
                if sigma_cp <= 0 or sigma_m1 <= 0:
                    return -np.inf
                zp = (p - mu_p) / sigma_cp
                lp = -0.5 * zp * zp - math.log(sigma_cp) - half_l2pi
                lp += _norm_sum(q - mu_q, sigma_cp)
                lp += _norm_sum(r - mu_r, sigma_cp)
                lp += _norm_sum(m1 - mu_m1, sigma_m1)
                for zz, sd in (((mu_p - mu_p0) / sp, sp), ((mu_q - mu_q0) / sq, sq),
                               ((mu_r - mu_r0) / sr, sr), ((mu_m1 - mu_m10) / sm, sm)):
                    lp += -0.5 * zz * zz - math.log(sd) - half_l2pi
                lp += (
                    c_ig_cp - (hyper.cp_shape + 1) * math.log(sigma_cp)
                    - hyper.cp_scale / sigma_cp
                )
                lp += (
                    c_ig_m1 - (hyper.m1_shape + 1) * math.log(sigma_m1)
                    - hyper.m1_scale / sigma_m1
                )
            else:
                zp = (p - mu_p0) / fixed_cp
                lp = -0.5 * zp * zp - math.log(fixed_cp) - half_l2pi
                lp += _norm_sum(q - mu_q0, fixed_cp)
                lp += _norm_sum(r - mu_r0, fixed_cp)
                lp += _norm_sum(m1 - mu_m10, fixed_m1)
            lp += _norm_sum(Pm - pm_means, pm_sd)
            lp += c_ig_noise - (ns + 1) * math.log(sigma) - nsc / sigma
            if n:
                mean = _segmented_mean_all(x, t, g, p, q, r, m1, Pm)
                resid = y - mean
                lp += (
                    -0.5 * float(resid @ resid) / (sigma * sigma)
                    - n * (math.log(sigma) + half_l2pi)
                )
            return lp

        return logpost

    # -- initialization --------------------------------------------------------

    def init_params(self, dataset: FleetDataset | None = None) -> PowerParams:
        """Prior means with feasible ordering; jitter is applied per chain."""
        hyper = self.hyper
        nt = self.n_tasks
        return PowerParams(
            K_per_l=self.K_per_l,
            p=hyper.mu_p[0],
            q=np.full(nt, hyper.mu_q[0]),
            r=np.full(nt, hyper.mu_r[0]),
            m1=np.full(nt, hyper.mu_m1[0]),
            Pm=np.asarray([hyper.pm_mean(l) for l in range(1, self.L + 1)]),
            mu_p=hyper.mu_p[0], mu_q=hyper.mu_q[0], mu_r=hyper.mu_r[0],
            sigma_cp=hyper.fixed_sigma_cp,
            mu_m1=hyper.mu_m1[0], sigma_m1=hyper.fixed_sigma_m1,
            sigma=hyper.noise_mode,
        )

    def init_vector(self, dataset: FleetDataset | None = None) -> np.ndarray:
        return self.pack(self.init_params(dataset))

    def fit(self, dataset: FleetDataset, config):
        """MCMC fit; config.init overrides the model's default initialization."""
        from .inference import run_mcmc

        init = config.init if config.init is not None else self.init_vector(dataset)
        return run_mcmc(
            self.log_posterior_fn(dataset), self.dim, config,
            positive=self.positive_mask, init=init, names=self.param_names,
        )

    # -- draw-level prediction helpers ------------------------------------------

    def mean_for_draws(self, draws: np.ndarray, k: int, l: int, xs) -> np.ndarray:
        """(S, len(xs)) curve means for a matrix of packed draws."""
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        names = self.param_names
        p = draws[:, 0]
        q = draws[:, names.index(f"q[{k},{l}]")]
        r = draws[:, names.index(f"r[{k},{l}]")]
        m1 = draws[:, names.index(f"m1[{k},{l}]")]
        Pm = draws[:, names.index(f"Pm[{l}]")]
        return _curve_for_draws(xs, p, q, r, m1, Pm)

    def sigma_draws(self, draws: np.ndarray) -> np.ndarray:
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        return draws[:, -1]

    def _sample_new_task_effects(self, draws, rng, max_tries: int = 100):
        """Fresh (q, r, m1) per draw row from the generating distributions.

        Orderings violating p < q < r are rejected and re-drawn; raises when
        the overall rejection rate exceeds 99% (degenerate hypers).
        """
        names = self.param_names
        p = draws[:, 0]
        mu_q = draws[:, names.index("mu_q")]
        mu_r = draws[:, names.index("mu_r")]
        sigma_cp = draws[:, names.index("sigma_cp")]
        mu_m1 = draws[:, names.index("mu_m1")]
        sigma_m1 = draws[:, names.index("sigma_m1")]

        S = draws.shape[0]
        q = np.empty(S)
        r = np.empty(S)
        m1 = np.empty(S)
        pending = np.arange(S)
        proposals = 0
        rejected = 0
        for _ in range(max_tries):
            if pending.size == 0:
                break
            q_try = mu_q[pending] + sigma_cp[pending] * rng.standard_normal(pending.size)
            r_try = mu_r[pending] + sigma_cp[pending] * rng.standard_normal(pending.size)
            m1_try = mu_m1[pending] + sigma_m1[pending] * rng.standard_normal(pending.size)
            ok = (p[pending] < q_try) & (q_try < r_try)
            proposals += pending.size
            rejected += int((~ok).sum())
            idx = pending[ok]
            q[idx] = q_try[ok]
            r[idx] = r_try[ok]
            m1[idx] = m1_try[ok]
            pending = pending[~ok]
        rejection_rate = rejected / max(proposals, 1)
        if pending.size or rejection_rate > 0.99:
            raise RuntimeError(
                f"generating distributions are degenerate: rejection rate "
                f"{rejection_rate:.3f} while sampling feasible change points"
            )
        return q, r, m1, rejection_rate

    def population_mean_for_draws(self, draws, l: int, xs, rng,
                                  max_tries: int = 100) -> tuple[np.ndarray, float]:
        """Curve means for a fresh task of condition l.

        Per posterior draw, new change points and slope are sampled from the
        generating distributions, rejecting orderings that violate p < q < r.
        Returns (means, rejection_rate).
        """
        if not self.sample_hypers:
            raise ValueError("population prediction requires sampled hyper-parameters")
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        p = draws[:, 0]
        Pm = draws[:, self.param_names.index(f"Pm[{l}]")]
        q, r, m1, rejection_rate = self._sample_new_task_effects(draws, rng, max_tries)
        return _curve_for_draws(xs, p, q, r, m1, Pm), rejection_rate

    def population_point_means(self, draws, l: int, x, rng,
                               max_tries: int = 100) -> np.ndarray:
        """Fresh-task curve mean at one x per draw row (one new task per row)."""
        if not self.sample_hypers:
            raise ValueError("population prediction requires sampled hyper-parameters")
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = draws[:, 0]
        Pm = draws[:, self.param_names.index(f"Pm[{l}]")]
        q, r, m1, _ = self._sample_new_task_effects(draws, rng, max_tries)
        return _pointwise_curve(x, p, q, r, m1, Pm)

    # -- variants ------------------------------------------------------------------

    def independent_variant(self) -> "IndependentPowerLayout":
        return independent_variant(self)


def _pointwise_curve(x, p, q, r, m1, Pm) -> np.ndarray:
    """Segmented curve with elementwise parameters (one curve per entry)."""
    p = np.broadcast_to(p, x.shape)
    m2 = (Pm - m1 * (q - p)) / (r - q)
    out = np.zeros_like(x)
    seg1 = (x >= p) & (x < q)
    seg2 = (x >= q) & (x < r)
    seg3 = x >= r
    out[seg1] = m1[seg1] * (x[seg1] - p[seg1])
    out[seg2] = m2[seg2] * (x[seg2] - q[seg2]) + m1[seg2] * (q[seg2] - p[seg2])
    out[seg3] = Pm[seg3]
    return out


def _curve_for_draws(xs, p, q, r, m1, Pm) -> np.ndarray:
    """Segmented curve evaluated for per-draw parameter vectors, (S, len(xs))."""
    X = xs[None, :]
    p = p[:, None]
    q = q[:, None]
    r = r[:, None]
    m1 = m1[:, None]
    Pm = Pm[:, None]
    m2 = (Pm - m1 * (q - p)) / (r - q)
    out = np.zeros(np.broadcast_shapes(X.shape, p.shape))
    seg1 = (X >= p) & (X < q)
    seg2 = (X >= q) & (X < r)
    seg3 = X >= r
    ramp1 = np.broadcast_to(m1 * (X - p), out.shape)
    ramp2 = np.broadcast_to(m2 * (X - q) + m1 * (q - p), out.shape)
    flat = np.broadcast_to(Pm, out.shape)
    out[seg1] = ramp1[seg1]
    out[seg2] = ramp2[seg2]
    out[seg3] = flat[seg3]
    return out


def single_task_model(l: int, hyper: PowerHyperPriors | None = None) -> PowerModel:
    """Single-task layout for a task operating under condition l.

    The pooled hyper-parameters are frozen at prior means (modes where the
    inverse-gamma mean does not exist) and the cut-in speed is untied.
    """
    hyper = hyper or PowerHyperPriors()
    # collapse the prior table so the single group keeps condition l's anchor
    hyper_l = PowerHyperPriors(
        mu_p=hyper.mu_p, mu_q=hyper.mu_q, mu_r=hyper.mu_r,
        cp_shape=hyper.cp_shape, cp_scale=hyper.cp_scale,
        mu_m1=hyper.mu_m1, m1_shape=hyper.m1_shape, m1_scale=hyper.m1_scale,
        pm_means=(hyper.pm_mean(l),), pm_var=hyper.pm_var,
        noise_shape=hyper.noise_shape, noise_scale=hyper.noise_scale,
    )
    return PowerModel(K_per_l=(1,), hyper=hyper_l, sample_hypers=False)


@dataclass(frozen=True)
class IndependentPowerLayout:
    """Per-task un-tied layout used by single-task learning."""

    task_models: dict

    @property
    def n_params(self) -> int:
        return sum(m.dim for m in self.task_models.values())


def independent_variant(model: PowerModel) -> IndependentPowerLayout:
    task_models = {}
    for l in range(1, model.L + 1):
        for k in range(1, model.K_per_l[l - 1] + 1):
            task_models[(k, l)] = single_task_model(l, model.hyper)
    return IndependentPowerLayout(task_models=task_models)
