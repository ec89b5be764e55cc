"""Semi-parametric mixed-effects log-hazard model.

Each task (k, l) has its own linear trend (intercept = log initial rate,
slope = exponential aging rate) partially pooled through shared
hyper-parameters, while the non-linear discrepancy is a B-spline expansion
whose weights are tied within each component group l.  The noise scale is
tied across the whole fleet.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import FleetDataset
from .densities import LOG_2PI, invgamma_logpdf, invgamma_mode, normal_logpdf
from .splines import SplineBasis, design_matrix, eval_basis

__all__ = [
    "HazardHyperPriors",
    "HazardParams",
    "HazardModel",
    "single_task_model",
    "independent_variant",
    "log_prior",
    "log_likelihood",
    "predict_mean",
]


@dataclass(frozen=True)
class HazardHyperPriors:
    """Fixed constants of the prior hierarchy.

    m_alpha / s_alpha are the mean and *variance* diagonal of the Gaussian
    hyper-prior on the population intercept/slope; (a, b) shape the
    inverse-gamma prior on the between-task standard deviations; the noise
    scale prior is inverse-gamma with mode noise_scale/(noise_shape+1); the
    spline weights carry a zero-centred shrinkage prior whose variance is
    inverse-gamma(v, v) with small v.
    """

    m_alpha: tuple[float, float] = (0.0, 1.5)
    s_alpha: tuple[float, float] = (2.0, 0.5)
    a: float = 1.0
    b: float = 1.0
    noise_shape: float = 3.0
    noise_scale: float = 0.8
    shrink_v: float = 1e-3

    def __post_init__(self):
        if min(self.s_alpha) <= 0 or self.a <= 0 or self.b <= 0:
            raise ValueError("hyper-prior scales must be positive")
        if self.noise_shape <= 0 or self.noise_scale <= 0 or self.shrink_v <= 0:
            raise ValueError("hyper-prior scales must be positive")

    @property
    def fixed_sigma_alpha(self) -> float:
        """Between-task deviation used when hypers are fixed (prior mode;
        the inverse-gamma mean does not exist for shape <= 1)."""
        return invgamma_mode(self.a, self.b)

    @property
    def noise_mode(self) -> float:
        return invgamma_mode(self.noise_shape, self.noise_scale)


@dataclass(frozen=True)
class HazardParams:
    """Full latent state; arrays are flattened l-major over tasks."""

    K_per_l: tuple[int, ...]
    alpha: np.ndarray          # (n_tasks, 2) intercept, slope
    beta: np.ndarray           # (L, H) spline weights per group
    sigma_h: np.ndarray        # (L, H) shrinkage scales
    mu_alpha: np.ndarray       # (2,)
    sigma_alpha: np.ndarray    # (2,)
    sigma: float               # tied noise std

    def __post_init__(self):
        n_tasks = int(sum(self.K_per_l))
        L = len(self.K_per_l)
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        sigma_h = np.asarray(self.sigma_h, dtype=float)
        mu_alpha = np.asarray(self.mu_alpha, dtype=float)
        sigma_alpha = np.asarray(self.sigma_alpha, dtype=float)
        if alpha.shape != (n_tasks, 2):
            raise ValueError(f"alpha must have shape ({n_tasks}, 2), got {alpha.shape}")
        if beta.ndim != 2 or beta.shape[0] != L:
            raise ValueError(f"beta must have shape ({L}, H), got {beta.shape}")
        if sigma_h.shape != beta.shape:
            raise ValueError("sigma_h must match beta's shape")
        if mu_alpha.shape != (2,) or sigma_alpha.shape != (2,):
            raise ValueError("mu_alpha and sigma_alpha must be 2-vectors")
        for name, value in (
            ("alpha", alpha), ("beta", beta), ("sigma_h", sigma_h),
            ("mu_alpha", mu_alpha), ("sigma_alpha", sigma_alpha),
        ):
            object.__setattr__(self, name, value)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def H(self) -> int:
        return self.beta.shape[1]

    def task_index(self, k: int, l: int) -> int:
        L = len(self.K_per_l)
        if not 1 <= l <= L:
            raise IndexError(f"group l={l} outside 1..{L}")
        if not 1 <= k <= self.K_per_l[l - 1]:
            raise IndexError(f"task k={k} outside 1..{self.K_per_l[l - 1]} in group l={l}")
        return int(sum(self.K_per_l[: l - 1]) + (k - 1))


def _check_basis(params: HazardParams, basis: SplineBasis) -> None:
    if params.H != basis.H:
        raise ValueError(f"params expect H={params.H} splines, basis has H={basis.H}")


def log_prior(params: HazardParams, hyper: HazardHyperPriors, basis: SplineBasis) -> float:
    """Log-density of the full prior hierarchy; -inf outside the feasible region."""
    _check_basis(params, basis)
    if params.sigma <= 0 or np.any(params.sigma_alpha <= 0) or np.any(params.sigma_h <= 0):
        return -np.inf
    lp = float(np.sum(normal_logpdf(params.alpha, params.mu_alpha, params.sigma_alpha)))
    lp += float(np.sum(normal_logpdf(params.mu_alpha, np.asarray(hyper.m_alpha),
                                     np.sqrt(hyper.s_alpha))))
    lp += float(np.sum(invgamma_logpdf(params.sigma_alpha, hyper.a, hyper.b)))
    lp += float(np.sum(normal_logpdf(params.beta, 0.0, params.sigma_h)))
    lp += float(np.sum(invgamma_logpdf(params.sigma_h**2, hyper.shrink_v, hyper.shrink_v)))
    lp += float(invgamma_logpdf(params.sigma, hyper.noise_shape, hyper.noise_scale))
    return lp


def _layout_arrays(dataset: FleetDataset, K_per_l: tuple[int, ...]):
    """(x, y, task index, group index) mapped onto an explicit task layout.

    Raises IndexError when an observation references a task outside it.
    """
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


def log_likelihood(params: HazardParams, dataset: FleetDataset, basis: SplineBasis) -> float:
    """Gaussian log-likelihood of the observed log-hazard values."""
    _check_basis(params, basis)
    if dataset.n == 0:
        return 0.0
    x, y, t, g = _layout_arrays(dataset, params.K_per_l)
    B = design_matrix(basis, x)
    mean = params.alpha[t, 0] + params.alpha[t, 1] * x + np.einsum(
        "nh,nh->n", B, params.beta[g]
    )
    z = (y - mean) / params.sigma
    return float(-0.5 * z @ z - y.size * (np.log(params.sigma) + 0.5 * LOG_2PI))


def predict_mean(params: HazardParams, k: int, l: int, x, basis: SplineBasis):
    """Model mean for task (k, l): linear trend plus the group's spline expansion."""
    _check_basis(params, basis)
    t = params.task_index(k, l)
    xs = np.asarray(x, dtype=float)
    B = design_matrix(basis, np.atleast_1d(xs))
    out = params.alpha[t, 0] + params.alpha[t, 1] * xs + (B @ params.beta[l - 1]).reshape(xs.shape)
    return float(out) if np.isscalar(x) else out


@dataclass(frozen=True)
class HazardModel:
    """Packing, densities, and prediction for one hazard-model parameterization.

    sample_hypers=True gives the partially-pooled fleet model; False fixes the
    hyper-parameters at their prior means/modes and is only used for
    single-task (independent) fits.
    """

    K_per_l: tuple[int, ...]
    basis: SplineBasis
    hyper: HazardHyperPriors = field(default_factory=HazardHyperPriors)
    sample_hypers: bool = True

    def __post_init__(self):
        object.__setattr__(self, "K_per_l", tuple(int(k) for k in self.K_per_l))
        if self.n_tasks < 1:
            raise ValueError("model needs at least one task")
        if not self.sample_hypers and self.n_tasks != 1:
            raise ValueError("fixed-hyper layout is single-task only")

    # -- layout ----------------------------------------------------------

    @property
    def L(self) -> int:
        return len(self.K_per_l)

    @property
    def H(self) -> int:
        return self.basis.H

    @property
    def n_tasks(self) -> int:
        return int(sum(self.K_per_l))

    @property
    def dim(self) -> int:
        base = 2 * self.n_tasks + 2 * self.L * self.H + 1
        return base + (4 if self.sample_hypers else 0)

    @property
    def param_names(self) -> list[str]:
        names = []
        for l in range(1, self.L + 1):
            for k in range(1, self.K_per_l[l - 1] + 1):
                names += [f"alpha1[{k},{l}]", f"alpha2[{k},{l}]"]
        for l in range(1, self.L + 1):
            names += [f"beta[{h},{l}]" for h in range(1, self.H + 1)]
        for l in range(1, self.L + 1):
            names += [f"sigma_h[{h},{l}]" for h in range(1, self.H + 1)]
        if self.sample_hypers:
            names += ["mu_alpha[1]", "mu_alpha[2]", "sigma_alpha[1]", "sigma_alpha[2]"]
        names.append("sigma")
        return names

    @property
    def positive_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        off = 2 * self.n_tasks + self.L * self.H
        mask[off: off + self.L * self.H] = True  # sigma_h
        if self.sample_hypers:
            mask[off + self.L * self.H + 2: off + self.L * self.H + 4] = True  # sigma_alpha
        mask[-1] = True  # sigma
        return mask

    def _slices(self):
        nt, L, H = self.n_tasks, self.L, self.H
        i = 0
        s_alpha = slice(i, i + 2 * nt); i += 2 * nt
        s_beta = slice(i, i + L * H); i += L * H
        s_sh = slice(i, i + L * H); i += L * H
        if self.sample_hypers:
            s_mu = slice(i, i + 2); i += 2
            s_sa = slice(i, i + 2); i += 2
        else:
            s_mu = s_sa = None
        s_sigma = i
        return s_alpha, s_beta, s_sh, s_mu, s_sa, s_sigma

    def pack(self, params: HazardParams) -> np.ndarray:
        vec = np.concatenate([
            params.alpha.ravel(),
            params.beta.ravel(),
            params.sigma_h.ravel(),
            params.mu_alpha if self.sample_hypers else np.empty(0),
            params.sigma_alpha if self.sample_hypers else np.empty(0),
            [params.sigma],
        ])
        assert vec.size == self.dim
        return vec

    def unpack(self, vec: np.ndarray) -> HazardParams:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got {vec.shape}")
        s_alpha, s_beta, s_sh, s_mu, s_sa, s_sigma = self._slices()
        if self.sample_hypers:
            mu_alpha = vec[s_mu]
            sigma_alpha = vec[s_sa]
        else:
            mu_alpha = np.asarray(self.hyper.m_alpha, dtype=float)
            sigma_alpha = np.full(2, self.hyper.fixed_sigma_alpha)
        return HazardParams(
            K_per_l=self.K_per_l,
            alpha=vec[s_alpha].reshape(self.n_tasks, 2),
            beta=vec[s_beta].reshape(self.L, self.H),
            sigma_h=vec[s_sh].reshape(self.L, self.H),
            mu_alpha=mu_alpha,
            sigma_alpha=sigma_alpha,
            sigma=vec[s_sigma],
        )

    # -- densities ---------------------------------------------------------

    def log_prior(self, params: HazardParams) -> float:
        if self.sample_hypers:
            return log_prior(params, self.hyper, self.basis)
        # fixed hypers: alpha prior at frozen population constants, no hyper terms
        if params.sigma <= 0 or np.any(params.sigma_h <= 0):
            return -np.inf
        hyper = self.hyper
        lp = float(np.sum(normal_logpdf(
            params.alpha, np.asarray(hyper.m_alpha), hyper.fixed_sigma_alpha
        )))
        lp += float(np.sum(normal_logpdf(params.beta, 0.0, params.sigma_h)))
        lp += float(np.sum(invgamma_logpdf(params.sigma_h**2, hyper.shrink_v, hyper.shrink_v)))
        lp += float(invgamma_logpdf(params.sigma, hyper.noise_shape, hyper.noise_scale))
        return lp

    def log_likelihood(self, params: HazardParams, dataset: FleetDataset) -> float:
        return log_likelihood(params, dataset, self.basis)

    def predict_mean(self, params: HazardParams, k: int, l: int, x):
        return predict_mean(params, k, l, x, self.basis)

    def log_posterior_fn(self, dataset: FleetDataset):
        """Fast closure vec -> log prior + log likelihood over prepared arrays.

        Hand-fused equivalent of log_prior + log_likelihood (the readable
        module-level functions are the reference; tests pin the two paths
        together).
        """
        import math

        x, y, t, g = _layout_arrays(dataset, self.K_per_l)
        B = design_matrix(self.basis, x)
        n = y.size
        nt, L, H = self.n_tasks, self.L, self.H
        LH = L * H
        s_alpha, s_beta, s_sh, s_mu, s_sa, s_sigma = self._slices()
        group_rows = [np.flatnonzero(g == i) for i in range(L)]
        B_groups = [np.ascontiguousarray(B[rows]) for rows in group_rows]
        hyper = self.hyper
        sample_hypers = self.sample_hypers
        m1c, m2c = (float(v) for v in hyper.m_alpha)
        s1c, s2c = (math.sqrt(float(v)) for v in hyper.s_alpha)
        fixed_sd = hyper.fixed_sigma_alpha
        a, b = hyper.a, hyper.b
        v = hyper.shrink_v
        ns, nsc = hyper.noise_shape, hyper.noise_scale
        c_ig_ab = a * math.log(b) - math.lgamma(a)
        c_ig_v = v * math.log(v) - math.lgamma(v)
        c_ig_noise = ns * math.log(nsc) - math.lgamma(ns)
        half_l2pi = 0.5 * LOG_2PI
        i_mu = s_mu.start if sample_hypers else 0
        i_sa = s_sa.start if sample_hypers else 0

        def logpost(vec: np.ndarray) -> float:
            sigma = vec[s_sigma]
            if sigma <= 0:
                return -np.inf
            sh = vec[s_sh]
            if sh.min() <= 0:
                return -np.inf
            a1 = vec[0:2 * nt:2]
            a2 = vec[1:2 * nt:2]
            beta = vec[s_beta]
            if sample_hypers:
                mu1 = vec[i_mu]
                mu2 = vec[i_mu + 1]
                sa1 = vec[i_sa]
                sa2 = vec[i_sa + 1]
                if sa1 <= 0 or sa2 <= 0:
                    return -np.inf
            else:
                mu1, mu2 = m1c, m2c
                sa1 = sa2 = fixed_sd

            # random-effect prior on the per-task lines
            d1 = a1 - mu1
            d2 = a2 - mu2
            lp = (
                -0.5 * (float(d1 @ d1) / (sa1 * sa1) + float(d2 @ d2) / (sa2 * sa2))
                - nt * (math.log(sa1) + math.log(sa2))
                - 2 * nt * half_l2pi
            )
            if sample_hypers:
                zm1 = (mu1 - m1c) / s1c
                zm2 = (mu2 - m2c) / s2c
                lp += (
                    -0.5 * (zm1 * zm1 + zm2 * zm2)
                    - math.log(s1c) - math.log(s2c) - 2 * half_l2pi
                )
                lp += (
                    2 * c_ig_ab
                    - (a + 1) * (math.log(sa1) + math.log(sa2))
                    - b / sa1 - b / sa2
                )

            # shrinkage prior on the spline weights (variance ~ IG(v, v))
            zb = beta / sh
            inv_sh = 1.0 / sh
            log_sh_sum = float(np.log(sh).sum())
            lp += -0.5 * float(zb @ zb) - log_sh_sum - LH * half_l2pi
            lp += LH * c_ig_v - (v + 1) * 2.0 * log_sh_sum - v * float(inv_sh @ inv_sh)

            # tied noise scale
            lp += c_ig_noise - (ns + 1) * math.log(sigma) - nsc / sigma

            if n:
                if L == 1:
                    spline = B @ beta
                else:
                    spline = np.empty(n)
                    beta2d = beta.reshape(L, H)
                    for i in range(L):
                        spline[group_rows[i]] = B_groups[i] @ beta2d[i]
                resid = y - a1[t] - a2[t] * x - spline
                lp += (
                    -0.5 * float(resid @ resid) / (sigma * sigma)
                    - n * (math.log(sigma) + half_l2pi)
                )
            return lp

        return logpost

    # -- initialization ----------------------------------------------------

    def init_params(self, dataset: FleetDataset) -> HazardParams:
        """OLS lines per task where identifiable, prior means/modes elsewhere."""
        hyper = self.hyper
        alpha = np.tile(np.asarray(hyper.m_alpha, dtype=float), (self.n_tasks, 1))
        x, y, t, _ = _layout_arrays(dataset, self.K_per_l)
        for ti in range(self.n_tasks):
            sel = t == ti
            if sel.sum() >= 2 and np.unique(x[sel]).size >= 2:
                coef = np.polynomial.polynomial.polyfit(x[sel], y[sel], 1)
                alpha[ti] = coef[:2]
        return HazardParams(
            K_per_l=self.K_per_l,
            alpha=alpha,
            beta=np.zeros((self.L, self.H)),
            sigma_h=np.full((self.L, self.H), 0.3),
            mu_alpha=np.asarray(hyper.m_alpha, dtype=float),
            sigma_alpha=np.full(2, hyper.fixed_sigma_alpha),
            sigma=hyper.noise_mode,
        )

    def init_vector(self, dataset: FleetDataset) -> np.ndarray:
        return self.pack(self.init_params(dataset))

    def fit(self, dataset: FleetDataset, config):
        """MCMC fit; config.init overrides the model's default initialization."""
        from .inference import run_mcmc

        init = config.init if config.init is not None else self.init_vector(dataset)
        return run_mcmc(
            self.log_posterior_fn(dataset), self.dim, config,
            positive=self.positive_mask, init=init, names=self.param_names,
        )

    # -- draw-level prediction helpers --------------------------------------

    def _column(self, name: str) -> int:
        return self.param_names.index(name)

    def mean_for_draws(self, draws: np.ndarray, k: int, l: int, xs) -> np.ndarray:
        """(S, len(xs)) model means for a matrix of packed draws."""
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        names = self.param_names
        a1 = draws[:, names.index(f"alpha1[{k},{l}]")]
        a2 = draws[:, names.index(f"alpha2[{k},{l}]")]
        beta_cols = [names.index(f"beta[{h},{l}]") for h in range(1, self.H + 1)]
        B = design_matrix(self.basis, xs)
        return a1[:, None] + a2[:, None] * xs[None, :] + draws[:, beta_cols] @ B.T

    def sigma_draws(self, draws: np.ndarray) -> np.ndarray:
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        return draws[:, self._column("sigma")]

    def population_mean_for_draws(self, draws, l: int, xs, rng) -> tuple[np.ndarray, float]:
        """Means for a fresh task of group l, drawing new linear effects per draw.

        Returns (means (S, len(xs)), rejection_rate); the hazard family has no
        ordering constraint so the rejection rate is always 0.
        """
        if not self.sample_hypers:
            raise ValueError("population prediction requires sampled hyper-parameters")
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        names = self.param_names
        mu = draws[:, [names.index("mu_alpha[1]"), names.index("mu_alpha[2]")]]
        sd = draws[:, [names.index("sigma_alpha[1]"), names.index("sigma_alpha[2]")]]
        alpha_new = mu + sd * rng.standard_normal(mu.shape)
        beta_cols = [names.index(f"beta[{h},{l}]") for h in range(1, self.H + 1)]
        B = design_matrix(self.basis, xs)
        means = alpha_new[:, :1] + alpha_new[:, 1:2] * xs[None, :] + draws[:, beta_cols] @ B.T
        return means, 0.0

    def population_point_means(self, draws, l: int, x, rng) -> np.ndarray:
        """Fresh-task mean at one x per draw row (one new task per row)."""
        if not self.sample_hypers:
            raise ValueError("population prediction requires sampled hyper-parameters")
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        names = self.param_names
        mu = draws[:, [names.index("mu_alpha[1]"), names.index("mu_alpha[2]")]]
        sd = draws[:, [names.index("sigma_alpha[1]"), names.index("sigma_alpha[2]")]]
        alpha_new = mu + sd * rng.standard_normal(mu.shape)
        beta_cols = [names.index(f"beta[{h},{l}]") for h in range(1, self.H + 1)]
        B = design_matrix(self.basis, x)
        spline = np.einsum("nh,nh->n", B, draws[:, beta_cols])
        return alpha_new[:, 0] + alpha_new[:, 1] * x + spline

    # -- variants -----------------------------------------------------------

    def single_group(self) -> "HazardModel":
        """Fully-tied variant: one spline discrepancy for all tasks (L = 1)."""
        return HazardModel(
            K_per_l=(self.n_tasks,),
            basis=self.basis,
            hyper=self.hyper,
            sample_hypers=self.sample_hypers,
        )

    def independent_variant(self) -> "IndependentHazardLayout":
        return independent_variant(self)


def single_task_model(basis: SplineBasis, hyper: HazardHyperPriors | None = None) -> HazardModel:
    """The independent (single-task) layout: own spline weights, shrinkage
    scales, and noise; hyper-parameters frozen at prior means/modes."""
    return HazardModel(
        K_per_l=(1,), basis=basis, hyper=hyper or HazardHyperPriors(), sample_hypers=False
    )


@dataclass(frozen=True)
class IndependentHazardLayout:
    """Per-task un-tied layout used by single-task learning.

    Each task gets its own spline weights, shrinkage scales, and noise; the
    population-level constants are frozen so the per-task posteriors are
    conditionally independent.
    """

    task_models: dict
    fixed_mu_alpha: tuple[float, float]
    fixed_sigma_alpha: float

    @property
    def n_params(self) -> int:
        return sum(m.dim for m in self.task_models.values())


def independent_variant(model: HazardModel) -> IndependentHazardLayout:
    stl = single_task_model(model.basis, model.hyper)
    task_models = {}
    for l in range(1, model.L + 1):
        for k in range(1, model.K_per_l[l - 1] + 1):
            task_models[(k, l)] = stl
    return IndependentHazardLayout(
        task_models=task_models,
        fixed_mu_alpha=model.hyper.m_alpha,
        fixed_sigma_alpha=model.hyper.fixed_sigma_alpha,
    )
