"""Resampling-based repeated-measures analysis of variance for functional data."""
from .core import (FunctionalDataset, Grid, condition_mean, grand_mean, pooled_subject_mean,
                   subject_mean)
from .errors import DegeneracyError, IngestionError, NumericalError
from .io import read_dataset_csv, write_dataset_csv
from .pointwise import PointwiseTrace, TraceKind, f_pointwise, ssa_pointwise, ssr_pointwise
from .posthoc import PosthocReport, extract_pair, run_posthoc
from .resampling import (CovarianceEstimate, ResamplingMethod, TestResult, estimate_covariance,
                         resample_B1, resample_B2, resample_B3, resample_P1, resample_P2,
                         run_test, run_tests, ssa_pointwise_B1)
from .simulation import (SimulationSpec, SimulationSummary, brownian_bridge, estimate_fwer,
                         estimate_rejection_rates, generate_dataset, generate_errors,
                         mean_function)
from .statistics import (StatisticKind, compute_statistic, integrate_trace, statistic_C,
                         statistic_D, statistic_E)

__version__ = "0.1.0"

__all__ = [
    "CovarianceEstimate", "DegeneracyError", "FunctionalDataset", "Grid", "IngestionError",
    "NumericalError", "PointwiseTrace", "PosthocReport", "ResamplingMethod", "SimulationSpec",
    "SimulationSummary", "StatisticKind", "TestResult", "TraceKind", "brownian_bridge",
    "compute_statistic", "condition_mean", "estimate_covariance", "estimate_fwer",
    "estimate_rejection_rates", "extract_pair", "f_pointwise", "generate_dataset",
    "generate_errors", "grand_mean", "integrate_trace", "mean_function", "pooled_subject_mean",
    "read_dataset_csv", "resample_B1", "resample_B2", "resample_B3", "resample_P1",
    "resample_P2", "run_posthoc", "run_test", "run_tests", "ssa_pointwise",
    "ssa_pointwise_B1", "ssr_pointwise", "statistic_C", "statistic_D", "statistic_E",
    "subject_mean", "write_dataset_csv",
]
