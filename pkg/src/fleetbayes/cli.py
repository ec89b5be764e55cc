"""Command-line orchestration: simulate, fit, predict, benchmark, analyze, decide.

All commands are driven by a YAML config plus ``--out`` artifact directory
and are deterministic given (config, seed): reruns produce byte-identical
numeric outputs.  Exit codes: 0 success, 1 I/O or data error, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import numpy as np
import yaml

from .analysis import posterior_corr, variance_reduction
from .benchmarks import CompareConfig, compare
from .dataset import FleetDataset, SplitSpec, load_csv, simulate_fleet
from .decision import UtilityLevel, UtilityTable, WindPrior, analyze_decision
from .hazard import HazardModel
from .inference import ChainConfig, InfeasibleInitError, PosteriorSamples, diagnostics
from .powercurve import PowerHyperPriors, PowerModel
from .prediction import population_sampler, posterior_predictive
from .scenarios import model_for_scenario, scenario_from_config, truth_records
from .splines import make_basis

__all__ = ["main"]

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    """Configuration problem; the message starts with the offending key path."""


class DataError(Exception):
    """I/O or data problem (missing artifact, corrupt CSV, infeasible fit)."""


_REQUIRED = object()


def _cfg_get(cfg: dict, path: str, default=_REQUIRED):
    node = cfg
    walked = []
    for part in path.split("."):
        walked.append(part)
        if not isinstance(node, dict) or part not in node:
            if default is _REQUIRED:
                raise ConfigError(f"{'.'.join(walked)}: missing required config key")
            return default
        node = node[part]
    return node


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path}: invalid YAML: {exc}") from exc
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path}: top level must be a mapping")
    return cfg


def _apply_seed_override(cfg: dict, seed: int | None) -> dict:
    """--seed S rewrites every section seed deterministically."""
    if seed is None:
        return cfg
    cfg = json.loads(json.dumps(cfg))  # deep copy
    cfg["seed"] = seed
    offsets = {"scenario": 0, "split": 1, "chains": 2, "decision": 3, "benchmark": 4}
    for section, off in offsets.items():
        cfg.setdefault(section, {})
        if isinstance(cfg[section], dict):
            cfg[section]["seed"] = seed + off
    return cfg


def _chain_config(cfg: dict) -> ChainConfig:
    section = _cfg_get(cfg, "chains", {}) or {}
    try:
        config = ChainConfig(
            n_chains=int(section.get("n_chains", 4)),
            burn_in=int(section.get("burn_in", 1000)),
            n_samples=int(section.get("n_samples", 2000)),
            seed=int(section.get("seed", _cfg_get(cfg, "seed", 0))),
            adapt_target=float(section.get("adapt_target", 0.44)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"chains: {exc}") from exc
    if config.burn_in == 0:
        print("warning: chains.burn_in = 0; step sizes will not adapt", file=sys.stderr)
    return config


def _split_spec(cfg: dict) -> SplitSpec:
    section = _cfg_get(cfg, "split", {}) or {}
    try:
        return SplitSpec(
            fraction=float(section.get("fraction", 0.75)),
            mode=str(section.get("mode", "random")),
            seed=section.get("seed", _cfg_get(cfg, "seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"split: {exc}") from exc


def _build_model(cfg: dict, dataset: FleetDataset):
    family = _cfg_get(cfg, "model.family", None) or _cfg_get(cfg, "scenario.family", None)
    if family is None and _cfg_get(cfg, "scenario.preset", None):
        preset = _cfg_get(cfg, "scenario.preset")
        family = "truck_hazard" if str(preset).startswith("truck") else "wind_power"
    if family is None:
        raise ConfigError("model.family: missing required config key")
    if family == "truck_hazard":
        x, _, _, _ = dataset.arrays()
        x_lo = float(_cfg_get(cfg, "model.x_lo", float(x.min())))
        x_hi = float(_cfg_get(cfg, "model.x_hi", float(x.max())))
        H = int(_cfg_get(cfg, "model.H", 5))
        try:
            basis = make_basis(x_lo, x_hi, H)
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from exc
        return HazardModel(K_per_l=dataset.K_per_l, basis=basis)
    if family == "wind_power":
        pm_means = _cfg_get(cfg, "model.pm_means", None)
        hyper = (
            PowerHyperPriors(pm_means=tuple(float(v) for v in pm_means))
            if pm_means is not None else PowerHyperPriors()
        )
        return PowerModel(K_per_l=dataset.K_per_l, hyper=hyper)
    raise ConfigError(f"model.family: unknown family {family!r}")


def _power_model_from_names(names: list[str]) -> PowerModel:
    """Rebuild the fitted power-curve layout from draw column names."""
    task_re = re.compile(r"^q\[(\d+),(\d+)\]$")
    by_group: dict[int, int] = {}
    for n in names:
        m = task_re.match(n)
        if m:
            k, l = int(m.group(1)), int(m.group(2))
            by_group[l] = max(by_group.get(l, 0), k)
    if not by_group or "p" not in names:
        raise DataError(
            "draws.csv does not look like a wind_power fit "
            "(decision analysis needs a power-curve posterior)"
        )
    K_per_l = tuple(by_group[l] for l in sorted(by_group))
    model = PowerModel(K_per_l=K_per_l)
    if model.param_names != list(names):
        raise DataError("draws.csv columns do not match a power-curve layout")
    return model


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                repr(float(v)) if isinstance(v, (float, np.floating)) else v
                for v in row
            ])


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_draws(out_dir: Path) -> PosteriorSamples:
    path = out_dir / "draws.csv"
    if not path.exists():
        raise DataError(f"missing artifact: {path} (run `fit` first)")
    try:
        return PosteriorSamples.from_csv(path)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _load_dataset(path: str | None) -> FleetDataset:
    if path is None:
        raise DataError("--data is required for this command")
    try:
        return load_csv(path)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc


# -- commands ---------------------------------------------------------------


def cmd_simulate(cfg: dict, out_dir: Path, data: str | None) -> None:
    section = _cfg_get(cfg, "scenario")
    if not isinstance(section, dict):
        raise ConfigError("scenario: must be a mapping")
    section = dict(section)
    section.setdefault("seed", _cfg_get(cfg, "seed", 0))
    try:
        scenario = scenario_from_config(section)
    except KeyError as exc:
        msg = exc.args[0]
        # bare key names become a key path; sentences pass through
        prefix = "scenario." if " " not in msg else "scenario: "
        raise ConfigError(f"{prefix}{msg}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    dataset = simulate_fleet(scenario)
    _write_csv(out_dir / "dataset.csv", ["x", "y", "k", "l"],
               [(o.x, o.y, o.k, o.l) for o in dataset.observations])
    _write_csv(out_dir / "truth.csv", ["name", "value"], truth_records(scenario))
    print(f"wrote {dataset.n} observations over {dataset.n_tasks} tasks "
          f"to {out_dir / 'dataset.csv'}")


def cmd_fit(cfg: dict, out_dir: Path, data: str | None) -> None:
    dataset = _load_dataset(data)
    model = _build_model(cfg, dataset)
    config = _chain_config(cfg)
    try:
        samples = model.fit(dataset, config)
    except InfeasibleInitError as exc:
        raise DataError(f"infeasible initialization: {exc}") from exc
    samples.to_csv(out_dir / "draws.csv")
    diag = diagnostics(samples)
    _write_json(out_dir / "diagnostics.json", diag.to_dict())
    worst = diag.max_rhat()
    if np.isfinite(worst) and worst > 1.05:
        print(f"warning: max R-hat = {worst:.3f} > 1.05; chains may not have mixed",
              file=sys.stderr)
    print(f"wrote {samples.n_chains}x{samples.n_samples} draws to {out_dir / 'draws.csv'}")


def cmd_predict(cfg: dict, out_dir: Path, data: str | None) -> None:
    dataset = _load_dataset(data)
    model = _build_model(cfg, dataset)
    samples = _read_draws(out_dir)
    if samples.names != model.param_names:
        raise DataError("draws.csv columns do not match the configured model")
    n_grid = int(_cfg_get(cfg, "predict.grid", 101))
    x, _, _, _ = dataset.arrays()
    grid = np.linspace(float(x.min()), float(x.max()), n_grid)
    rows = []
    for (k, l) in dataset.tasks():
        pred = posterior_predictive(samples, model, k, l, grid,
                                    seed=int(_cfg_get(cfg, "seed", 0)))
        for i, xv in enumerate(grid):
            rows.append((k, l, float(xv), float(pred.mean[i]), float(pred.std[i]),
                         float(pred.lo3[i]), float(pred.hi3[i])))
    _write_csv(out_dir / "predictive.csv",
               ["k", "l", "x", "mean", "std", "lo3", "hi3"], rows)
    print(f"wrote predictive bands for {dataset.n_tasks} tasks to "
          f"{out_dir / 'predictive.csv'}")


def cmd_benchmark(cfg: dict, out_dir: Path, data: str | None) -> None:
    dataset = _load_dataset(data)
    model = _build_model(cfg, dataset)
    section = _cfg_get(cfg, "benchmark", {}) or {}
    config = CompareConfig(
        split=_split_spec(cfg),
        chains=_chain_config(cfg),
        trials=int(section.get("trials", 100)),
        eps=float(section.get("eps", 1e-6)),
        bootstrap_seed=int(section.get("seed", _cfg_get(cfg, "seed", 0))),
    )
    result = compare(dataset, model, config)
    _write_csv(out_dir / "benchmark.csv", ["method", "k", "l", "score"],
               [(m, k, l, s) for (m, k, l, s) in result.rows])
    reduction = variance_reduction(result.stl_samples, result.mtl_samples,
                                   _cfg_get(cfg, "analysis.selector", "*"))
    _write_csv(out_dir / "variance_reduction.csv",
               ["name", "k", "l", "stl_std", "mtl_std", "reduction_pct"],
               [(r.name, r.k, r.l, r.stl_std, r.mtl_std, r.reduction_pct)
                for r in reduction.rows])
    _write_json(out_dir / "benchmark_totals.json", {
        "totals": {m: result.totals[m] for m in result.totals},
        "variance_reduction_averages": reduction.averages,
    })
    print(f"wrote method comparison to {out_dir / 'benchmark.csv'}")


def cmd_analyze(cfg: dict, out_dir: Path, data: str | None) -> None:
    samples = _read_draws(out_dir)
    selector = _cfg_get(cfg, "analysis.selector", None)
    if selector is None:
        selector = "alpha2[*" if any(n.startswith("alpha") for n in samples.names) else "q[*"
    try:
        corr, labels = posterior_corr(samples, selector)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    rows = []
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            rows.append((a, b, float(corr[i, j])))
    _write_csv(out_dir / "correlation.csv", ["param_i", "param_j", "corr"], rows)
    print(f"wrote {len(labels)}x{len(labels)} correlation matrix to "
          f"{out_dir / 'correlation.csv'}")


def cmd_decide(cfg: dict, out_dir: Path, data: str | None) -> None:
    samples = _read_draws(out_dir)
    model = _power_model_from_names(samples.names)
    section = _cfg_get(cfg, "decision", {}) or {}

    levels_cfg = section.get("levels")
    if levels_cfg is None:
        table = UtilityTable.default()
    else:
        try:
            table = UtilityTable(levels=tuple(
                UtilityLevel(
                    name=str(lv["name"]),
                    threshold=float(lv["threshold"]),
                    payout=float(lv["payout"]),
                    penalty=float(lv["penalty"]),
                )
                for lv in levels_cfg
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"decision.levels: {exc}") from exc

    prior_cfg = section.get("wind_prior", {}) or {}
    if "point" in prior_cfg:
        wind = float(prior_cfg["point"])
    else:
        try:
            wind = WindPrior(a=float(prior_cfg.get("a", 4.0)),
                             b=float(prior_cfg.get("b", 2.0)))
        except ValueError as exc:
            raise ConfigError(f"decision.wind_prior: {exc}") from exc

    l = int(section.get("condition", 1))
    if not 1 <= l <= model.L:
        raise ConfigError(f"decision.condition: group {l} outside 1..{model.L}")
    seed = int(section.get("seed", _cfg_get(cfg, "seed", 0)))
    sampler = population_sampler(samples, model, l=l)
    result = analyze_decision(
        sampler, wind, table,
        n_mc=int(section.get("n_mc", 20000)),
        n_outer=int(section.get("n_outer", 2000)),
        n_inner=int(section.get("n_inner", 200)),
        seed=seed,
    )
    payload = {
        "levels": [
            {
                "name": lv.name,
                "threshold": lv.threshold,
                "payout": lv.payout,
                "penalty": lv.penalty,
                "expected_utility": result.utilities[i],
                "mc_standard_error": result.standard_errors[i],
            }
            for i, lv in enumerate(table.levels)
        ],
        "optimal_level": result.optimal_level.name,
        "vopi": {
            "vopi": result.vopi.vopi,
            "preposterior_mean": result.vopi.preposterior_mean,
            "prior_optimal": result.vopi.prior_optimal,
            "mc_standard_error": result.vopi.se_preposterior,
        },
        "condition": l,
    }
    _write_json(out_dir / "decision.json", payload)
    _write_csv(out_dir / "decision_histogram.csv", ["utility"],
               [(float(u),) for u in result.vopi.per_measurement])
    print(f"optimal level: {result.optimal_level.name}; "
          f"VoPI = {result.vopi.vopi:.6g} (report in {out_dir / 'decision.json'})")


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "benchmark": cmd_benchmark,
    "analyze": cmd_analyze,
    "decide": cmd_decide,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fleetbayes",
        description="Hierarchical Bayesian multitask learning for engineering fleets",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="YAML config file")
    parser.add_argument("--data", help="input dataset CSV (x,y,k,l)")
    parser.add_argument("--out", required=True, help="artifact directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override every section seed in the config")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        cfg = _apply_seed_override(cfg, args.seed)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg, out_dir, args.data)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
