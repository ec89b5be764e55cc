"""Utility-based decision analysis over power commitments.

An operator commits to one of several minimum power levels; delivering earns
the level's payout, falling short pays its penalty.  Expected utilities are
Monte Carlo estimates over the wind prior and the population-level power
predictive.  The preposterior analysis re-optimises the commitment for each
hypothetical perfect wind measurement; the mean gain over deciding under the
prior is the expected value of perfect information.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "UtilityLevel",
    "UtilityTable",
    "WindPrior",
    "DecisionResult",
    "VopiResult",
    "expected_utility",
    "optimal_action",
    "vopi",
    "analyze_decision",
]


@dataclass(frozen=True)
class UtilityLevel:
    name: str
    threshold: float   # committed minimum power
    payout: float
    penalty: float


@dataclass(frozen=True)
class UtilityTable:
    """Commitment levels ordered by threshold; the first level is the
    zero-commitment (walk-away) option with zero payout and penalty."""

    levels: tuple[UtilityLevel, ...]

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError("utility table needs at least one level")
        thresholds = [lv.threshold for lv in levels]
        if any(b < a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("thresholds must be non-decreasing")
        if levels[0].payout != 0.0 or levels[0].penalty != 0.0:
            raise ValueError("the first level must have zero payout and zero penalty")
        for lv in levels:
            if lv.payout < 0:
                raise ValueError(f"payout must be >= 0 ({lv.name})")
            if lv.penalty > 0:
                raise ValueError(f"penalty must be <= 0 ({lv.name})")

    @classmethod
    def default(cls) -> "UtilityTable":
        return cls(levels=(
            UtilityLevel("L0", 0.0, 0.0, 0.0),
            UtilityLevel("L1", 0.5, 0.3, -0.3),
            UtilityLevel("L2", 0.75, 0.75, -1.0),
        ))

    def find(self, level) -> int:
        """Index of a level given a UtilityLevel, its name, or an index."""
        if isinstance(level, UtilityLevel):
            for i, lv in enumerate(self.levels):
                if lv == level:
                    return i
            raise ValueError(f"level {level.name!r} not in table")
        if isinstance(level, str):
            for i, lv in enumerate(self.levels):
                if lv.name == level:
                    return i
            raise ValueError(f"level {level!r} not in table")
        i = int(level)
        if not 0 <= i < len(self.levels):
            raise ValueError(f"level index {i} outside 0..{len(self.levels) - 1}")
        return i


@dataclass(frozen=True)
class WindPrior:
    """Beta prior over normalised wind speed on [0, 1]."""

    a: float = 4.0
    b: float = 2.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Beta shape parameters must be > 0")

    def sample(self, n: int, rng) -> np.ndarray:
        return rng.beta(self.a, self.b, size=n)


def _draw_wind(wind, n: int, rng) -> np.ndarray:
    """Wind draws from a WindPrior, a point value, or a sampler callable."""
    if isinstance(wind, WindPrior):
        return wind.sample(n, rng)
    if callable(wind):
        return np.asarray(wind(n, rng), dtype=float)
    return np.full(n, float(wind))


def _is_point(wind) -> bool:
    return not isinstance(wind, WindPrior) and not callable(wind)


def _utilities(powers: np.ndarray, level: UtilityLevel) -> np.ndarray:
    return np.where(powers >= level.threshold, level.payout, level.penalty)


def expected_utility(power_sampler: Callable, wind, level, table: UtilityTable,
                     n_mc: int = 10000, seed: int = 0) -> float:
    """Monte Carlo estimate of P(y* >= P_L) * payout + P(y* < P_L) * penalty."""
    if n_mc < 1:
        raise ValueError(f"n_mc must be >= 1, got {n_mc}")
    lv = table.levels[table.find(level)]
    rng = np.random.default_rng(seed)
    winds = _draw_wind(wind, n_mc, rng)
    powers = np.asarray(power_sampler(winds, rng), dtype=float)
    return float(_utilities(powers, lv).mean())


def optimal_action(utilities: Sequence[float], table: UtilityTable) -> tuple[int, UtilityLevel]:
    """Level with maximal expected utility; ties break toward the lowest threshold."""
    utilities = np.asarray(list(utilities), dtype=float)
    if utilities.size != len(table.levels):
        raise ValueError(
            f"{utilities.size} utilities for {len(table.levels)} levels"
        )
    idx = int(np.argmax(utilities))  # first maximum = lowest threshold on ties
    return idx, table.levels[idx]


@dataclass(frozen=True)
class VopiResult:
    """Value-of-perfect-information decomposition.

    vopi = preposterior_mean - prior_optimal; per_measurement holds the
    re-optimised expected utility of each hypothetical wind observation.
    """

    vopi: float
    preposterior_mean: float
    prior_optimal: float
    prior_utilities: tuple[float, ...]
    optimal_index: int
    per_measurement: np.ndarray
    se_preposterior: float

    @property
    def se_vopi(self) -> float:
        return self.se_preposterior


def vopi(power_sampler: Callable, wind, table: UtilityTable,
         n_outer: int = 1000, n_inner: int = 100, seed: int = 0) -> VopiResult:
    """Preposterior value of perfectly observing wind speed before committing.

    Draws n_outer hypothetical perfect measurements from the wind prior; for
    each, the commitment is re-optimised over n_inner conditional power draws.
    The prior-optimal utility is estimated from the same pooled draws, so the
    preposterior mean dominates it by construction and the reported value of
    information is never negative.  A point-mass wind prior carries no
    removable uncertainty, so its value of information is exactly zero.
    """
    if n_outer < 1 or n_inner < 1:
        raise ValueError("n_outer and n_inner must be >= 1")
    rng = np.random.default_rng(seed)
    levels = table.levels

    if _is_point(wind):
        winds = np.full(n_outer * n_inner, float(wind))
        powers = np.asarray(power_sampler(winds, rng), dtype=float)
        prior_utils = tuple(float(_utilities(powers, lv).mean()) for lv in levels)
        idx, _ = optimal_action(prior_utils, table)
        u_star = prior_utils[idx]
        return VopiResult(
            vopi=0.0,
            preposterior_mean=u_star,
            prior_optimal=u_star,
            prior_utilities=prior_utils,
            optimal_index=idx,
            per_measurement=np.full(n_outer, u_star),
            se_preposterior=0.0,
        )

    measurements = _draw_wind(wind, n_outer, rng)
    winds = np.repeat(measurements, n_inner)
    powers = np.asarray(power_sampler(winds, rng), dtype=float).reshape(n_outer, n_inner)

    # per-measurement expected utility for every level, then re-optimise
    eu = np.empty((n_outer, len(levels)))
    for j, lv in enumerate(levels):
        eu[:, j] = _utilities(powers, lv).mean(axis=1)
    per_measurement = eu.max(axis=1)
    preposterior_mean = float(per_measurement.mean())
    se_prepost = float(per_measurement.std(ddof=1) / np.sqrt(n_outer)) if n_outer > 1 else 0.0

    prior_utils = tuple(float(v) for v in eu.mean(axis=0))
    idx, _ = optimal_action(prior_utils, table)
    prior_optimal = prior_utils[idx]

    return VopiResult(
        vopi=preposterior_mean - prior_optimal,
        preposterior_mean=preposterior_mean,
        prior_optimal=prior_optimal,
        prior_utilities=prior_utils,
        optimal_index=idx,
        per_measurement=per_measurement,
        se_preposterior=se_prepost,
    )


@dataclass(frozen=True)
class DecisionResult:
    """Per-level expected utilities, the optimal commitment, and optionally
    the value of perfectly observing wind speed first."""

    table: UtilityTable
    utilities: tuple[float, ...]
    standard_errors: tuple[float, ...]
    optimal_index: int
    vopi: VopiResult | None = None

    def __post_init__(self):
        if self.utilities[self.optimal_index] < max(self.utilities):
            raise ValueError("optimal level must attain the maximum expected utility")

    @property
    def optimal_level(self) -> UtilityLevel:
        return self.table.levels[self.optimal_index]


def analyze_decision(power_sampler: Callable, wind, table: UtilityTable,
                     n_mc: int = 10000, n_outer: int = 1000, n_inner: int = 100,
                     seed: int = 0, with_vopi: bool = True) -> DecisionResult:
    """Rank the commitment levels and (optionally) price perfect wind data."""
    rng = np.random.default_rng(seed)
    winds = _draw_wind(wind, n_mc, rng)
    powers = np.asarray(power_sampler(winds, rng), dtype=float)
    utilities = []
    ses = []
    for lv in table.levels:
        u = _utilities(powers, lv)
        utilities.append(float(u.mean()))
        ses.append(float(u.std(ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else 0.0)
    idx, _ = optimal_action(utilities, table)
    vopi_result = None
    if with_vopi:
        vopi_result = vopi(power_sampler, wind, table,
                           n_outer=n_outer, n_inner=n_inner, seed=seed + 1)
    return DecisionResult(
        table=table,
        utilities=tuple(utilities),
        standard_errors=tuple(ses),
        optimal_index=idx,
        vopi=vopi_result,
    )
