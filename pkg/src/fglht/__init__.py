"""General linear hypothesis tests for functional responses with a
rank-deficient design."""

from .bootstrap import BootstrapKind, TestResult, bootstrap_test, bootstrap_tests
from .data import build_contrast, build_factorial_design, load_noise_data
from .model import (
    CoefficientEstimate,
    CovarianceEstimate,
    DesignMatrix,
    FunctionalDataset,
    Hypothesis,
    TimeGrid,
    build_design,
    check_estimable,
    estimate_beta,
    estimate_covariance,
    moore_penrose_pinv,
)
from .analysis import factor_pvalues, realdata_study
from .simulation import NoiseCase, ScenarioConfig, SizePowerReport, run_scenario
from .stats import (
    ScaleFunction,
    StatisticKind,
    decompose,
    integrate_grid,
    scale_dataset,
    scale_hypothesis,
    statistic,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapKind",
    "CoefficientEstimate",
    "CovarianceEstimate",
    "DesignMatrix",
    "FunctionalDataset",
    "Hypothesis",
    "NoiseCase",
    "ScaleFunction",
    "ScenarioConfig",
    "SizePowerReport",
    "StatisticKind",
    "TestResult",
    "TimeGrid",
    "bootstrap_test",
    "bootstrap_tests",
    "build_contrast",
    "build_design",
    "build_factorial_design",
    "check_estimable",
    "decompose",
    "estimate_beta",
    "estimate_covariance",
    "factor_pvalues",
    "integrate_grid",
    "load_noise_data",
    "moore_penrose_pinv",
    "realdata_study",
    "run_scenario",
    "scale_dataset",
    "scale_hypothesis",
    "statistic",
]
