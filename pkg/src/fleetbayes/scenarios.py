"""Preset synthetic fleet scenarios and their ground-truth records.

The presets stand in for operational datasets: a truck component fleet with
long-tailed task sizes (a handful of data-rich sub-fleets supporting very
sparse ones, whose observation windows also end early), and a small wind
farm with normal and curtailed operating conditions where one curtailed
turbine has yet to reach its rated speed.
"""

from __future__ import annotations

import numpy as np

from .dataset import SyntheticScenario
from .hazard import HazardModel
from .powercurve import PowerModel
from .splines import make_basis

__all__ = [
    "truck_default",
    "truck_two_group",
    "wind_default",
    "scenario_from_config",
    "model_for_scenario",
    "truth_records",
]

TRUCK_SIZES = (180, 108, 70, 49, 15, 7, 7, 1)
TRUCK_BETA = (0.9, -0.9, 1.1, -0.8, 0.9)


def truck_default(seed: int, sizes: tuple[int, ...] = TRUCK_SIZES,
                  noise_std: float = 0.15, H: int = 5) -> SyntheticScenario:
    """One-component truck fleet: 8 sub-fleets, 4 of them sparse with short
    observation windows."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    K = len(sizes)
    # tight between-task spread: the regime where pooling pays off
    alpha = np.column_stack([
        rng.normal(0.0, 0.25, size=K),
        rng.normal(1.5, 0.15, size=K),
    ])
    basis = make_basis(0.0, 1.0, H)
    beta = np.array([TRUCK_BETA[:H]]) if H <= len(TRUCK_BETA) else np.array(
        [list(TRUCK_BETA) + [0.0] * (H - len(TRUCK_BETA))]
    )
    n_rich = min(4, K)
    x_ranges = tuple(
        (0.0, 1.0) if t < n_rich else (0.0, 0.45) for t in range(K)
    )
    return SyntheticScenario(
        family="truck_hazard",
        K_per_l=(K,),
        n_per_task=tuple(sizes),
        noise_std=noise_std,
        seed=seed,
        x_ranges=x_ranges,
        alpha=alpha,
        beta=beta,
        basis=basis,
    )


def truck_two_group(seed: int,
                    sizes: tuple[int, ...] = (130, 80, 28, 10, 110, 70, 24, 9),
                    noise_std: float = 0.15, H: int = 5) -> SyntheticScenario:
    """Two component groups whose non-linear discrepancies differ in sign,
    so tying the spline weights across groups misfits."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 202]))
    K_per_l = (4, 4)
    n_tasks = sum(K_per_l)
    if len(sizes) != n_tasks:
        raise ValueError(f"need {n_tasks} sizes, got {len(sizes)}")
    alpha = np.column_stack([
        rng.normal(0.0, 0.25, size=n_tasks),
        rng.normal(1.5, 0.15, size=n_tasks),
    ])
    basis = make_basis(0.0, 1.0, H)
    base = np.array(TRUCK_BETA[:H] if H <= len(TRUCK_BETA)
                    else list(TRUCK_BETA) + [0.0] * (H - len(TRUCK_BETA)))
    beta = np.vstack([base, -base])
    x_ranges = []
    for l in range(2):
        for k in range(4):
            x_ranges.append((0.0, 1.0) if k < 2 else (0.0, 0.45))
    return SyntheticScenario(
        family="truck_hazard",
        K_per_l=K_per_l,
        n_per_task=tuple(sizes),
        noise_std=noise_std,
        seed=seed,
        x_ranges=tuple(x_ranges),
        alpha=alpha,
        beta=beta,
        basis=basis,
    )


def wind_default(seed: int, noise_std: float = 0.04) -> SyntheticScenario:
    """Three turbines, two operating conditions; turbine 1 is never curtailed
    and the first curtailed task is sparse and stops short of rated speed."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 303]))
    K_per_l = (3, 2)
    n_tasks = 5
    q = rng.normal(0.4, 0.02, size=n_tasks)
    r = rng.normal(0.6, 0.02, size=n_tasks)
    # first slope well above the implied second slope, so the limit onset is
    # identifiable from the kink
    m1 = rng.normal(3.2, 0.1, size=n_tasks)
    return SyntheticScenario(
        family="wind_power",
        K_per_l=K_per_l,
        n_per_task=(260, 140, 90, 25, 110),
        noise_std=noise_std,
        seed=seed,
        x_ranges=((0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 0.55), (0.0, 1.0)),
        p=0.2,
        q=q,
        r=r,
        m1=m1,
        Pm=np.array([1.0, 0.8]),
    )


_PRESETS = {
    "truck_default": truck_default,
    "truck_two_group": truck_two_group,
    "wind_default": wind_default,
}


def scenario_from_config(cfg: dict) -> SyntheticScenario:
    """Build a scenario from a config mapping: a named preset with optional
    overrides, or a fully explicit description."""
    cfg = dict(cfg)
    seed = int(cfg.pop("seed", 0))
    preset = cfg.pop("preset", None)
    if preset is not None:
        try:
            builder = _PRESETS[preset]
        except KeyError:
            raise KeyError(f"unknown preset {preset!r}; choose from {sorted(_PRESETS)}")
        allowed = {"sizes", "noise_std", "H"} if preset.startswith("truck") else {"noise_std"}
        bad = set(cfg) - allowed
        if bad:
            raise KeyError(f"unsupported override(s) for preset {preset!r}: {sorted(bad)}")
        if "sizes" in cfg:
            cfg["sizes"] = tuple(int(v) for v in cfg["sizes"])
        return builder(seed, **cfg)

    family = cfg.pop("family", None)
    if family is None:
        raise KeyError("scenario needs either a preset or a family")
    if family not in ("truck_hazard", "wind_power"):
        raise KeyError(f"unknown family {family!r}")
    common = dict(
        family=family,
        K_per_l=tuple(int(v) for v in cfg["K_per_l"]),
        n_per_task=tuple(int(v) for v in cfg["n_per_task"]),
        noise_std=float(cfg["noise_std"]),
        seed=seed,
        x_ranges=tuple((float(a), float(b)) for a, b in cfg["x_ranges"]),
    )
    if family == "truck_hazard":
        basis = make_basis(float(cfg.get("x_lo", 0.0)), float(cfg.get("x_hi", 1.0)),
                           int(cfg["H"]))
        return SyntheticScenario(
            **common,
            alpha=np.asarray(cfg["alpha"], dtype=float),
            beta=np.asarray(cfg["beta"], dtype=float),
            basis=basis,
        )
    return SyntheticScenario(
        **common,
        p=float(cfg["p"]),
        q=np.asarray(cfg["q"], dtype=float),
        r=np.asarray(cfg["r"], dtype=float),
        m1=np.asarray(cfg["m1"], dtype=float),
        Pm=np.asarray(cfg["Pm"], dtype=float),
    )


def model_for_scenario(scenario: SyntheticScenario):
    """The fleet model whose layout matches the scenario's."""
    if scenario.family == "truck_hazard":
        return HazardModel(K_per_l=scenario.K_per_l, basis=scenario.basis)
    return PowerModel(K_per_l=scenario.K_per_l)


def truth_records(scenario: SyntheticScenario) -> list[tuple[str, float]]:
    """(canonical parameter name, true value) rows for recovery checks."""
    rows: list[tuple[str, float]] = []
    tasks = [
        (k, l)
        for l in range(1, len(scenario.K_per_l) + 1)
        for k in range(1, scenario.K_per_l[l - 1] + 1)
    ]
    if scenario.family == "truck_hazard":
        for t, (k, l) in enumerate(tasks):
            rows.append((f"alpha1[{k},{l}]", float(scenario.alpha[t, 0])))
            rows.append((f"alpha2[{k},{l}]", float(scenario.alpha[t, 1])))
        for l in range(1, len(scenario.K_per_l) + 1):
            for h in range(1, scenario.basis.H + 1):
                rows.append((f"beta[{h},{l}]", float(scenario.beta[l - 1, h - 1])))
    else:
        rows.append(("p", float(scenario.p)))
        for t, (k, l) in enumerate(tasks):
            rows.append((f"q[{k},{l}]", float(scenario.q[t])))
            rows.append((f"r[{k},{l}]", float(scenario.r[t])))
            rows.append((f"m1[{k},{l}]", float(scenario.m1[t])))
        for l in range(1, len(scenario.K_per_l) + 1):
            rows.append((f"Pm[{l}]", float(scenario.Pm[l - 1])))
    rows.append(("sigma", float(scenario.noise_std)))
    return rows
