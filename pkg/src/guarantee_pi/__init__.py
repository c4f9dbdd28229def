"""Bootstrap prediction intervals for linear models with a controllable guarantee level."""

from .distributions import Laplace, Normal
from .empirical import RngStream, ecdf, quantile, resample
from .intervals import (
    BootstrapConfig,
    Method,
    PredictionInterval,
    ResidualType,
    bootstrap_roots,
    guarantee_adjustment,
    prediction_interval,
    rb_interval,
    rbug_interval,
)
from .model_core import Dataset, FittedModel, design_summary, fit_ols, load_csv, predictive_residuals
from .simulation import SimConfig, SimulationReport, experiment_model_config, run_experiment

__version__ = "0.1.0"
