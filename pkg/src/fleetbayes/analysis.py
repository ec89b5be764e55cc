"""Posterior structure reports: correlation matrices and variance reduction.

Correlations are Pearson coefficients over the pooled post-burn-in draws;
variance reduction compares partially-pooled posteriors against independent
per-task fits, parameter by parameter.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .inference import PosteriorSamples

__all__ = [
    "posterior_corr",
    "variance_reduction",
    "VarianceReductionRow",
    "VarianceReductionResult",
]

# canonical-name categories: how bracket indices map onto tasks
_TASK_INDEXED = {"alpha1", "alpha2", "q", "r", "m1"}
_BASIS_INDEXED = {"beta", "sigma_h"}
_GROUP_INDEXED = {"Pm"}

_NAME_RE = re.compile(r"^(\w+)\[(\d+)(?:,(\d+))?\]$")


def posterior_corr(samples: PosteriorSamples, selector: str) -> tuple[np.ndarray, list[str]]:
    """Pearson correlation matrix of the selected parameters' pooled draws.

    Zero-variance dimensions get NaN markers in their row/column (including
    the diagonal) without contaminating the rest of the matrix.
    """
    labels = samples.select(selector)
    if len(labels) < 2:
        raise ValueError(f"selector {selector!r} matched {len(labels)} parameter(s); need >= 2")
    pooled = samples.pooled()
    if pooled.shape[0] < 3:
        raise ValueError(f"need >= 3 draws, have {pooled.shape[0]}")
    cols = [samples.names.index(n) for n in labels]
    X = pooled[:, cols]
    sd = X.std(axis=0, ddof=1)
    defined = sd > 0

    corr = np.full((len(labels), len(labels)), np.nan)
    if defined.any():
        sub = np.atleast_2d(np.corrcoef(X[:, defined], rowvar=False))
        sub = 0.5 * (sub + sub.T)  # make floating-point symmetry exact
        sub = np.clip(sub, -1.0, 1.0)
        np.fill_diagonal(sub, 1.0)
        idx = np.flatnonzero(defined)
        corr[np.ix_(idx, idx)] = sub
    return corr, labels


def _stl_counterpart(name: str) -> str | None:
    """Map a pooled-model parameter name onto its single-task equivalent.

    Task-indexed effects relabel to task (1, 1); basis weights keep their h
    index in group 1; tied scalars keep their name.  Returns None for
    parameters with no single-task counterpart (the pooled hypers).
    """
    m = _NAME_RE.match(name)
    if m is None:
        if name.startswith("mu_") or name.startswith("sigma_alpha") or name in (
            "sigma_cp", "sigma_m1"
        ):
            return None
        return name
    base, first, second = m.group(1), m.group(2), m.group(3)
    if base in _TASK_INDEXED:
        return f"{base}[1,1]"
    if base in _BASIS_INDEXED:
        return f"{base}[{first},1]"
    if base in _GROUP_INDEXED:
        return f"{base}[1]"
    return None


def _tasks_for(name: str, tasks: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Which tasks a pooled-model parameter speaks for."""
    m = _NAME_RE.match(name)
    if m is None:
        return list(tasks)  # tied scalar: every task has its own estimate
    base, first, second = m.group(1), m.group(2), m.group(3)
    if base in _TASK_INDEXED and second is not None:
        return [(int(first), int(second))]
    if base in _BASIS_INDEXED and second is not None:
        l = int(second)
        return [kl for kl in tasks if kl[1] == l]
    if base in _GROUP_INDEXED:
        l = int(first)
        return [kl for kl in tasks if kl[1] == l]
    return []


@dataclass(frozen=True)
class VarianceReductionRow:
    name: str
    k: int
    l: int
    stl_std: float
    mtl_std: float
    reduction_pct: float


@dataclass(frozen=True)
class VarianceReductionResult:
    rows: list
    averages: dict               # effect base name -> mean reduction %
    missing: list = field(default_factory=list)

    def average_for(self, base: str) -> float:
        return self.averages[base]


def variance_reduction(stl_samples: dict, mtl_samples: PosteriorSamples,
                       selector: str = "*") -> VarianceReductionResult:
    """Posterior-std reduction, 100 * (1 - std_MTL / std_STL), per parameter.

    stl_samples maps (k, l) to that task's independent fit.  Parameters whose
    counterpart is absent on either side are listed in `missing` and excluded
    from the per-effect averages.
    """
    tasks = sorted(stl_samples.keys(), key=lambda kl: (kl[1], kl[0]))
    rows: list[VarianceReductionRow] = []
    missing: list[str] = []
    for name in mtl_samples.select(selector):
        counterpart = _stl_counterpart(name)
        if counterpart is None:
            missing.append(name)
            continue
        spoken = _tasks_for(name, tasks)
        if not spoken:
            missing.append(name)
            continue
        for (k, l) in spoken:
            stl = stl_samples.get((k, l))
            if stl is None or counterpart not in stl.names:
                missing.append(f"{name} @ (k={k}, l={l})")
                continue
            stl_std = stl.std(counterpart)
            mtl_std = mtl_samples.std(name)
            if stl_std == 0.0:
                missing.append(f"{name} @ (k={k}, l={l}) [zero STL std]")
                continue
            rows.append(VarianceReductionRow(
                name=name, k=k, l=l,
                stl_std=stl_std, mtl_std=mtl_std,
                reduction_pct=100.0 * (1.0 - mtl_std / stl_std),
            ))

    base_of = lambda n: _NAME_RE.match(n).group(1) if _NAME_RE.match(n) else n
    averages: dict[str, float] = {}
    for base in sorted({base_of(r.name) for r in rows}):
        vals = [r.reduction_pct for r in rows if base_of(r.name) == base]
        averages[base] = float(np.mean(vals))
    return VarianceReductionResult(rows=rows, averages=averages, missing=missing)
