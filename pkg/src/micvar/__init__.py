"""Lag-order selection for vector autoregressions with the mean square
information criterion (MIC), alongside AIC, BIC and HQ."""

from .criteria import (
    AIC,
    BIC,
    HQ,
    MIC,
    MIC_MT,
    MIC_SP,
    CriterionKind,
    SelectionResult,
    lambda_st,
    md,
    mic_mt,
    mic_oracle,
    mic_sp,
    parse_criteria,
    parse_criterion,
    select_many,
    select_order,
)
from .estimation import FitResult, build_design, ols_fit, sample_loss_curve
from .experiments import ExperimentConfig, build_process, generate_coefficients, run_experiment
from .forecasting import ForecastProtocol, evaluate, one_step_forecast, wmsfe
from .process import (
    GaussianDiagonal,
    GaussianFull,
    GaussianMixture,
    RegimeSwitchingMean,
    VarCoefficients,
    is_stable,
    oracle_lambda_window,
    population_autocovariances,
    population_loss,
    population_loss_curve,
    population_loss_recursive,
    simulate,
)
from .timeseries import TimeSeries, demean, first_difference, log_transform, read_csv, write_csv

__version__ = "0.1.0"
