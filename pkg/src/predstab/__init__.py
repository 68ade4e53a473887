"""Bootstrap instability assessment for clinical risk prediction models."""

__version__ = "0.1.0"

from .curves import Curve, calibration_curve, decision_curve, loess_fit, net_benefit
from .dataset import Dataset, SimConfig, bootstrap_sample, load_csv, simulate_population
from .engines import ModelSpec, fit_spec, predict
from .exceptions import (ConvergenceError, CurveError, DataError, FitError, PredStabError, SeparationError,
                         ShrinkageError, SingleClassError, SplitError, StabilityError)
from .simstudy import SimExperiment, level_summaries, mape_vs_truth, run_sim_experiment
from .stability import (BootstrapPredictions, StabilityReport, average_mape, build_report, c_statistic,
                        classification_instability, mape_per_individual, percentile_band,
                        run_bootstrap_stability)

__all__ = [
    "BootstrapPredictions", "ConvergenceError", "Curve", "CurveError", "DataError", "Dataset", "FitError",
    "ModelSpec", "PredStabError", "SeparationError", "ShrinkageError", "SimConfig", "SimExperiment",
    "SingleClassError", "SplitError", "StabilityError", "StabilityReport", "average_mape", "bootstrap_sample",
    "build_report", "c_statistic", "calibration_curve", "classification_instability", "decision_curve",
    "fit_spec", "level_summaries", "load_csv", "loess_fit", "mape_per_individual", "mape_vs_truth",
    "net_benefit", "percentile_band", "predict", "run_bootstrap_stability", "run_sim_experiment",
    "simulate_population",
]
