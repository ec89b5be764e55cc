"""Hierarchical Bayesian multitask learning for engineering fleets.

Fits correlated per-task regression models (truck-component hazard curves,
wind-turbine power curves) with partial pooling and tied parameters, compares
them against single-task / complete-pooling / correlation-alignment
baselines, and runs posterior-correlation and value-of-information analyses.
"""

from .analysis import posterior_corr, variance_reduction
from .benchmarks import CompareConfig, compare, coral_transform, fit_cp, fit_crl, fit_stl
from .dataset import (
    FleetDataset,
    NormalizationTransform,
    Observation,
    SplitSpec,
    SyntheticScenario,
    empirical_hazard,
    load_csv,
    simulate_failure_times,
    simulate_fleet,
    split_train_test,
    zscore_normalize,
)
from .decision import (
    DecisionResult,
    UtilityLevel,
    UtilityTable,
    WindPrior,
    expected_utility,
    optimal_action,
    vopi,
)
from .hazard import HazardHyperPriors, HazardModel, HazardParams
from .inference import ChainConfig, Diagnostics, PosteriorSamples, diagnostics, run_mcmc
from .powercurve import PowerHyperPriors, PowerModel, PowerParams, power_mean
from .prediction import (
    bootstrap_pll,
    population_predict,
    population_sampler,
    posterior_predictive,
    predictive_log_likelihood,
)
from .splines import SplineBasis, design_matrix, eval_basis, make_basis, select_H

__version__ = "0.1.0"
