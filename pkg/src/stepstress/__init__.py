"""Robust inference for interval-monitored step-stress tests with competing risks.

The package fits the exponential cumulative-exposure model to failure
counts recorded at inspection times, using a family of divergence-based
estimators indexed by a tuning parameter ``beta`` (``beta = 0`` is maximum
likelihood; larger values trade efficiency for outlier resistance).  On top
of the fit it provides lifetime characteristics with three kinds of
confidence interval, influence diagnostics, and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .bootstrap import BcaResult, BootstrapConfig, bca_interval, simulate_dataset
from .characteristics import (
    CharacteristicEstimate,
    cause_specific_mttf,
    cause_specific_quantile,
    cause_specific_reliability,
    mttf,
    quantile,
    reliability,
    transformed_ci,
)
from .errors import (
    DatasetFormatError,
    DegenerateDataError,
    DesignError,
    DomainError,
    IllPosedError,
    NonConvergenceError,
    SimulationError,
    SingularInformationError,
    StepStressError,
)
from .estimation import (
    CountData,
    FitOptions,
    FitResult,
    asymptotic_covariance,
    dpd_loss,
    estimating_equation_residual,
    fit,
    fit_probability_vector,
    param_confidence_interval,
)
from .io import ArrheniusSpec, arrhenius_stress, load_dataset, load_scenario, save_dataset, save_report
from .model import (
    CellProbabilities,
    DerivativeMatrix,
    ModelParams,
    StepStressDesign,
    cell_probabilities,
    derivative_matrix,
    lifetime_cdf,
    relative_risk,
    shifting_time,
)
from .robustness import (
    SensitivityCurve,
    cell_sensitivity,
    influence_function,
    influence_matrix,
    sensitivity,
    sensitivity_curve,
)
from .simulation import (
    CoverageStudyResult,
    MseStudyResult,
    SimulationScenario,
    contamination_cells_for_intervals,
    generate_contaminated,
    run_coverage_study,
    run_mse_study,
)

__all__ = [
    "__version__",
    # model
    "StepStressDesign", "ModelParams", "CellProbabilities", "DerivativeMatrix",
    "shifting_time", "relative_risk", "cell_probabilities", "derivative_matrix",
    "lifetime_cdf",
    # estimation
    "CountData", "FitOptions", "FitResult", "dpd_loss", "fit",
    "fit_probability_vector", "estimating_equation_residual",
    "asymptotic_covariance", "param_confidence_interval",
    # characteristics
    "CharacteristicEstimate", "mttf", "reliability", "quantile", "transformed_ci",
    "cause_specific_mttf", "cause_specific_reliability", "cause_specific_quantile",
    # bootstrap
    "BootstrapConfig", "BcaResult", "simulate_dataset", "bca_interval",
    # robustness
    "SensitivityCurve", "influence_function", "influence_matrix", "sensitivity",
    "cell_sensitivity", "sensitivity_curve",
    # simulation
    "SimulationScenario", "MseStudyResult", "CoverageStudyResult",
    "contamination_cells_for_intervals", "generate_contaminated",
    "run_mse_study", "run_coverage_study",
    # io
    "ArrheniusSpec", "arrhenius_stress", "load_dataset", "save_dataset",
    "load_scenario", "save_report",
    # errors
    "StepStressError", "DesignError", "DomainError", "IllPosedError",
    "NonConvergenceError", "SingularInformationError", "DegenerateDataError",
    "DatasetFormatError", "SimulationError",
]
