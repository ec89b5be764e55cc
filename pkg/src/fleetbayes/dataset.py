"""Fleet datasets: ingestion, normalization, splitting, and synthetic generation.

Observations are (x, y) pairs tagged with a task index k (sub-fleet or
turbine, 1-based within its group) and a group index l (component or
operating condition, 1-based).  Datasets are immutable; every operation
returns new values and is deterministic given its seed.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .splines import SplineBasis, design_matrix

__all__ = [
    "Observation",
    "FleetDataset",
    "NormalizationTransform",
    "SplitSpec",
    "SyntheticScenario",
    "SplitWarning",
    "HazardWarning",
    "load_csv",
    "zscore_normalize",
    "split_train_test",
    "empirical_hazard",
    "simulate_failure_times",
    "gompertz_inverse_cdf",
    "simulate_fleet",
    "segmented_power_mean",
]


class SplitWarning(UserWarning):
    """A task was too small to split and went entirely to the training set."""


class HazardWarning(UserWarning):
    """An empirical-hazard interval had failures but no survivors and was skipped."""


@dataclass(frozen=True)
class Observation:
    x: float
    y: float
    k: int
    l: int

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError(f"task/group indices must be >= 1, got k={self.k}, l={self.l}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite observation (x={self.x}, y={self.y})")


@dataclass(frozen=True)
class NormalizationTransform:
    """Z-scoring constants (population standard deviations)."""

    mean_x: float
    std_x: float
    mean_y: float
    std_y: float

    def __post_init__(self):
        if self.std_x <= 0 or self.std_y <= 0:
            raise ValueError("normalization standard deviations must be > 0")

    def normalize_x(self, x):
        return (np.asarray(x, dtype=float) - self.mean_x) / self.std_x

    def normalize_y(self, y):
        return (np.asarray(y, dtype=float) - self.mean_y) / self.std_y

    def denormalize_x(self, x):
        return np.asarray(x, dtype=float) * self.std_x + self.mean_x

    def denormalize_y(self, y):
        return np.asarray(y, dtype=float) * self.std_y + self.mean_y


@dataclass(frozen=True)
class FleetDataset:
    """Immutable collection of observations plus the task layout.

    K_per_l[l-1] is the number of tasks in group l; tasks are flattened
    l-major (all of group 1, then group 2, ...) wherever a single task
    index is needed.
    """

    observations: tuple[Observation, ...]
    K_per_l: tuple[int, ...]
    transform: NormalizationTransform | None = None

    def __post_init__(self):
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        K_per_l = tuple(int(k) for k in self.K_per_l)
        object.__setattr__(self, "K_per_l", K_per_l)
        L = len(K_per_l)
        for o in obs:
            if o.l > L:
                raise ValueError(f"observation group l={o.l} exceeds L={L}")
            if o.k > K_per_l[o.l - 1]:
                raise ValueError(
                    f"observation task k={o.k} exceeds K={K_per_l[o.l - 1]} in group l={o.l}"
                )

    @classmethod
    def from_observations(cls, observations, K_per_l=None, transform=None) -> "FleetDataset":
        obs = tuple(observations)
        if K_per_l is None:
            L = max((o.l for o in obs), default=0)
            K_per_l = tuple(
                max((o.k for o in obs if o.l == l), default=0) for l in range(1, L + 1)
            )
        return cls(observations=obs, K_per_l=tuple(K_per_l), transform=transform)

    @classmethod
    def from_arrays(cls, x, y, k, l, K_per_l=None, transform=None) -> "FleetDataset":
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        k = np.broadcast_to(np.asarray(k, dtype=int), x.shape)
        l = np.broadcast_to(np.asarray(l, dtype=int), x.shape)
        obs = [Observation(float(xi), float(yi), int(ki), int(li)) for xi, yi, ki, li in zip(x, y, k, l)]
        return cls.from_observations(obs, K_per_l=K_per_l, transform=transform)

    # -- layout helpers -------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def L(self) -> int:
        return len(self.K_per_l)

    @property
    def n_tasks(self) -> int:
        return int(sum(self.K_per_l))

    def task_offsets(self) -> np.ndarray:
        """Flattened index of task (k=1, l) for each group l."""
        return np.concatenate([[0], np.cumsum(self.K_per_l)[:-1]]).astype(int)

    def task_index(self, k: int, l: int) -> int:
        """0-based flattened task index for (k, l)."""
        if not 1 <= l <= self.L:
            raise IndexError(f"group l={l} outside 1..{self.L}")
        if not 1 <= k <= self.K_per_l[l - 1]:
            raise IndexError(f"task k={k} outside 1..{self.K_per_l[l - 1]} in group l={l}")
        return int(self.task_offsets()[l - 1] + (k - 1))

    def tasks(self) -> list[tuple[int, int]]:
        """All (k, l) pairs in flattened order."""
        return [(k, l) for l in range(1, self.L + 1) for k in range(1, self.K_per_l[l - 1] + 1)]

    def counts(self) -> dict[tuple[int, int], int]:
        out = {kl: 0 for kl in self.tasks()}
        for o in self.observations:
            out[(o.k, o.l)] += 1
        return out

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(x, y, flattened task index, group index - 1) as numpy arrays."""
        x = np.array([o.x for o in self.observations])
        y = np.array([o.y for o in self.observations])
        offsets = self.task_offsets()
        t = np.array([offsets[o.l - 1] + (o.k - 1) for o in self.observations], dtype=int)
        g = np.array([o.l - 1 for o in self.observations], dtype=int)
        return x, y, t, g

    def task_subset(self, k: int, l: int) -> "FleetDataset":
        """Observations of one task, relabelled to (k=1, l=1)."""
        self.task_index(k, l)
        obs = [Observation(o.x, o.y, 1, 1) for o in self.observations if o.k == k and o.l == l]
        return FleetDataset(observations=tuple(obs), K_per_l=(1,), transform=self.transform)

    def pooled(self) -> "FleetDataset":
        """All observations relabelled to a single task (k=1, l=1)."""
        obs = [Observation(o.x, o.y, 1, 1) for o in self.observations]
        return FleetDataset(observations=tuple(obs), K_per_l=(1,), transform=self.transform)

    def relabel_single_group(self) -> "FleetDataset":
        """Collapse groups, keeping tasks distinct: (k, l) -> (flattened k, 1)."""
        offsets = self.task_offsets()
        obs = [
            Observation(o.x, o.y, int(offsets[o.l - 1] + o.k), 1) for o in self.observations
        ]
        return FleetDataset(obs, K_per_l=(self.n_tasks,), transform=self.transform)


@dataclass(frozen=True)
class SplitSpec:
    fraction: float
    mode: str = "random"
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise ValueError(f"split fraction must be in (0, 1), got {self.fraction}")
        if self.mode not in ("random", "ordered"):
            raise ValueError(f"split mode must be 'random' or 'ordered', got {self.mode!r}")
        if self.mode == "random" and self.seed is None:
            raise ValueError("random split requires a seed")


def load_csv(path, schema=("x", "y", "k", "l")) -> FleetDataset:
    """Load a fleet dataset from a CSV with named x, y, k, l columns.

    Extra columns are ignored; k and l must parse as positive integers.
    """
    x_col, y_col, k_col, l_col = schema
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file (no header row)")
        for col in schema:
            if col not in reader.fieldnames:
                raise ValueError(f"{path}: missing column {col!r}")
        observations = []
        for i, row in enumerate(reader, start=2):  # line 1 is the header
            try:
                x = float(row[x_col])
                y = float(row[y_col])
                k = int(row[k_col])
                l = int(row[l_col])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: unparseable row at line {i}: {exc}") from exc
            if k < 1 or l < 1:
                raise ValueError(f"{path}: non-positive task/group index at line {i}")
            observations.append(Observation(x, y, k, l))
    if not observations:
        raise ValueError(f"{path}: no data rows")
    return FleetDataset.from_observations(observations)


def zscore_normalize(dataset: FleetDataset) -> tuple[FleetDataset, NormalizationTransform]:
    """Z-score x and y over the whole dataset (population standard deviation)."""
    if dataset.n < 2:
        raise ValueError(f"need at least 2 observations to normalize, got {dataset.n}")
    x, y, _, _ = dataset.arrays()
    std_x = float(x.std())
    std_y = float(y.std())
    if std_x == 0.0:
        raise ValueError("x column is constant (zero variance)")
    if std_y == 0.0:
        raise ValueError("y column is constant (zero variance)")
    transform = NormalizationTransform(float(x.mean()), std_x, float(y.mean()), std_y)
    obs = tuple(
        Observation(
            float(transform.normalize_x(o.x)), float(transform.normalize_y(o.y)), o.k, o.l
        )
        for o in dataset.observations
    )
    return FleetDataset(obs, dataset.K_per_l, transform=transform), transform


def split_train_test(dataset: FleetDataset, spec: SplitSpec) -> tuple[FleetDataset, FleetDataset]:
    """Split per task (stratified by (k, l)); train size is floor(fraction * N_kl).

    Tasks with fewer than 2 observations go entirely to train with a
    SplitWarning.  Ordered mode keeps the earliest fraction (by x) in train.
    """
    rng = np.random.default_rng(spec.seed) if spec.mode == "random" else None
    by_task: dict[tuple[int, int], list[Observation]] = {kl: [] for kl in dataset.tasks()}
    for o in dataset.observations:
        by_task[(o.k, o.l)].append(o)

    train: list[Observation] = []
    test: list[Observation] = []
    for kl in dataset.tasks():
        obs = by_task[kl]
        n = len(obs)
        if n == 0:
            continue
        if n < 2:
            warnings.warn(
                f"task (k={kl[0]}, l={kl[1]}) has {n} observation(s); all sent to train",
                SplitWarning,
            )
            train.extend(obs)
            continue
        n_train = int(math.floor(spec.fraction * n))
        if spec.mode == "random":
            order = rng.permutation(n)
        else:
            order = np.argsort([o.x for o in obs], kind="stable")
        train.extend(obs[i] for i in order[:n_train])
        test.extend(obs[i] for i in order[n_train:])

    return (
        FleetDataset(tuple(train), dataset.K_per_l, transform=dataset.transform),
        FleetDataset(tuple(test), dataset.K_per_l, transform=dataset.transform),
    )


def empirical_hazard(failure_times, n_units: int, interval: float) -> list[tuple[float, float]]:
    """Empirical hazard samples (interval midpoint, failed / surviving at start).

    Only intervals containing at least one failure produce a sample; an
    interval whose survivor count is already zero is skipped with a warning.
    """
    times = np.asarray(failure_times, dtype=float).ravel()
    if interval <= 0:
        raise ValueError(f"interval must be > 0, got {interval}")
    if np.any(times <= 0):
        raise ValueError("failure times must be positive")
    if n_units < times.size:
        raise ValueError(f"n_units={n_units} smaller than number of failures {times.size}")
    if times.size == 0:
        return []

    bins = np.floor(times / interval).astype(int)
    out = []
    prior_failures = 0
    for b in range(int(bins.max()) + 1):
        failed = int(np.sum(bins == b))
        surviving = n_units - prior_failures
        prior_failures += failed
        if failed == 0:
            continue
        if surviving <= 0:
            warnings.warn(
                f"hazard interval {b} has {failed} failure(s) but no survivors; skipped",
                HazardWarning,
            )
            continue
        out.append(((b + 0.5) * interval, failed / surviving))
    return out


def gompertz_inverse_cdf(u, gamma: float, phi: float):
    """Inverse CDF of the failure-time distribution with log-linear hazard.

    t = (1/phi) * ln(1 - (phi/gamma) * ln(1-u)); the phi -> 0 limit is the
    exponential distribution with rate gamma.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u >= 1)):
        raise ValueError("u must lie in [0, 1)")
    log1mu = np.log1p(-u)
    if abs(phi) < 1e-12:
        return -log1mu / gamma
    arg = 1.0 - (phi / gamma) * log1mu
    if np.any(arg <= 0):
        raise ValueError(
            f"parameters gamma={gamma}, phi={phi} produce a non-positive log argument"
        )
    return np.log(arg) / phi


def simulate_failure_times(gamma: float, phi: float, n: int, seed: int) -> np.ndarray:
    """Draw n i.i.d. failure times by inverse-CDF sampling."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return gompertz_inverse_cdf(rng.random(n), gamma, phi)


def segmented_power_mean(x, p: float, q: float, r: float, m1: float, Pm: float):
    """Piecewise-linear power curve: 0 below cut-in, ramps, then flat at Pm."""
    x = np.asarray(x, dtype=float)
    if not (p < q < r):
        raise ValueError(f"change points must satisfy p < q < r, got {p}, {q}, {r}")
    m2 = (Pm - m1 * (q - p)) / (r - q)
    out = np.zeros_like(x)
    seg1 = (x >= p) & (x < q)
    seg2 = (x >= q) & (x < r)
    seg3 = x >= r
    out[seg1] = m1 * (x[seg1] - p)
    out[seg2] = m2 * (x[seg2] - q) + m1 * (q - p)
    out[seg3] = Pm
    return out


@dataclass(frozen=True)
class SyntheticScenario:
    """Ground-truth description of a synthetic fleet.

    Truths are stored per flattened task (l-major order) and per group;
    truck_hazard scenarios carry (alpha, beta, basis) and wind_power
    scenarios carry (p, q, r, m1, Pm).
    """

    family: str
    K_per_l: tuple[int, ...]
    n_per_task: tuple[int, ...]
    noise_std: float
    seed: int
    x_ranges: tuple[tuple[float, float], ...]
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None
    basis: SplineBasis | None = None
    p: float | None = None
    q: np.ndarray | None = None
    r: np.ndarray | None = None
    m1: np.ndarray | None = None
    Pm: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in ("truck_hazard", "wind_power"):
            raise ValueError(f"unknown scenario family {self.family!r}")
        n_tasks = int(sum(self.K_per_l))
        if len(self.n_per_task) != n_tasks:
            raise ValueError(
                f"n_per_task has {len(self.n_per_task)} entries for {n_tasks} tasks"
            )
        if any(n < 0 for n in self.n_per_task):
            raise ValueError("per-task sample sizes must be >= 0")
        if not self.noise_std > 0:
            raise ValueError(f"noise std must be > 0, got {self.noise_std}")
        if len(self.x_ranges) != n_tasks:
            raise ValueError("need one x range per task")
        for lo, hi in self.x_ranges:
            if not lo < hi:
                raise ValueError(f"bad x range ({lo}, {hi})")
        if self.family == "truck_hazard":
            if self.alpha is None or self.beta is None or self.basis is None:
                raise ValueError("truck_hazard scenario needs alpha, beta, and basis")
            alpha = np.asarray(self.alpha, dtype=float)
            beta = np.asarray(self.beta, dtype=float)
            if alpha.shape != (n_tasks, 2):
                raise ValueError(f"alpha must have shape ({n_tasks}, 2), got {alpha.shape}")
            if beta.shape != (len(self.K_per_l), self.basis.H):
                raise ValueError(
                    f"beta must have shape ({len(self.K_per_l)}, {self.basis.H}), got {beta.shape}"
                )
            object.__setattr__(self, "alpha", alpha)
            object.__setattr__(self, "beta", beta)
        else:
            needed = (self.p, self.q, self.r, self.m1, self.Pm)
            if any(v is None for v in needed):
                raise ValueError("wind_power scenario needs p, q, r, m1, and Pm")
            q = np.asarray(self.q, dtype=float)
            r = np.asarray(self.r, dtype=float)
            m1 = np.asarray(self.m1, dtype=float)
            Pm = np.asarray(self.Pm, dtype=float)
            if q.shape != (n_tasks,) or r.shape != (n_tasks,) or m1.shape != (n_tasks,):
                raise ValueError("q, r, m1 must each have one entry per task")
            if Pm.shape != (len(self.K_per_l),):
                raise ValueError("Pm must have one entry per group")
            if np.any(self.p >= q) or np.any(q >= r):
                raise ValueError("change points must be ordered p < q < r for every task")
            object.__setattr__(self, "q", q)
            object.__setattr__(self, "r", r)
            object.__setattr__(self, "m1", m1)
            object.__setattr__(self, "Pm", Pm)

    @property
    def n_tasks(self) -> int:
        return int(sum(self.K_per_l))

    def task_mean(self, t: int, xs) -> np.ndarray:
        """Noise-free model mean for flattened task t."""
        xs = np.asarray(xs, dtype=float)
        group = int(np.searchsorted(np.cumsum(self.K_per_l), t, side="right"))
        if self.family == "truck_hazard":
            B = design_matrix(self.basis, xs)
            return self.alpha[t, 0] + self.alpha[t, 1] * xs + B @ self.beta[group]
        return segmented_power_mean(
            xs, self.p, float(self.q[t]), float(self.r[t]), float(self.m1[t]), float(self.Pm[group])
        )


def simulate_fleet(scenario: SyntheticScenario) -> FleetDataset:
    """Generate a fleet dataset from the scenario truths, deterministic in seed."""
    rng = np.random.default_rng(scenario.seed)
    observations = []
    t = 0
    for l in range(1, len(scenario.K_per_l) + 1):
        for k in range(1, scenario.K_per_l[l - 1] + 1):
            n = scenario.n_per_task[t]
            lo, hi = scenario.x_ranges[t]
            xs = rng.uniform(lo, hi, size=n)
            mean = scenario.task_mean(t, xs)
            ys = mean + scenario.noise_std * rng.standard_normal(n)
            observations.extend(
                Observation(float(x), float(y), k, l) for x, y in zip(xs, ys)
            )
            t += 1
    return FleetDataset(tuple(observations), scenario.K_per_l)
