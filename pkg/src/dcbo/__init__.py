"""Sequential experimental design with Gaussian processes and dependence
measures: function estimation under aggregate observations (interval means,
smoothed gradients, disk means) and black-box maximum search."""

from .depmeasures import dist_cor, dist_cov, mi_knn
from .gp import (
    Dataset,
    GPModel,
    NumericalError,
    Posterior,
    apply_operator_to_samples,
    fit_posterior,
    loo_objective,
    optimize_hypers,
    predictive_variance,
    sample_posterior,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    RunRecord,
    UndefinedMetricError,
    compute_r2,
    compute_regret,
    cumulative_regret,
    load_config,
    parse_config,
    read_records,
    run_experiment,
    summarize,
    write_records,
)
from .kernels import (
    KernelSpec,
    ObservationOperator,
    QuadratureRule,
    cross_cov_matrix,
    eval_kernel,
    operator_cross_cov,
)
from .policies import (
    MAX_POLICY_KINDS,
    AcquisitionState,
    EstimationConfig,
    MaxPolicy,
    estimation_fixed_width_step,
    estimation_random_step,
    estimation_step,
    max_search_step,
)
from .problems import (
    BENCHMARKS,
    Benchmark,
    ElevationGrid,
    GridFormatError,
    RandomFunction,
    eval_benchmark,
    gen_random_function,
    load_elevation_grid,
    rescale_elevation,
    save_elevation_grid,
    true_disk_mean,
    true_interval_mean,
    true_smoothed_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionState",
    "BENCHMARKS",
    "Benchmark",
    "ConfigError",
    "Dataset",
    "ElevationGrid",
    "EstimationConfig",
    "ExperimentConfig",
    "GPModel",
    "GridFormatError",
    "KernelSpec",
    "MAX_POLICY_KINDS",
    "MaxPolicy",
    "NumericalError",
    "ObservationOperator",
    "Posterior",
    "QuadratureRule",
    "RandomFunction",
    "RunRecord",
    "UndefinedMetricError",
    "apply_operator_to_samples",
    "compute_r2",
    "compute_regret",
    "cross_cov_matrix",
    "cumulative_regret",
    "dist_cor",
    "dist_cov",
    "estimation_fixed_width_step",
    "estimation_random_step",
    "estimation_step",
    "eval_benchmark",
    "eval_kernel",
    "fit_posterior",
    "gen_random_function",
    "load_config",
    "load_elevation_grid",
    "loo_objective",
    "max_search_step",
    "mi_knn",
    "operator_cross_cov",
    "optimize_hypers",
    "parse_config",
    "predictive_variance",
    "read_records",
    "rescale_elevation",
    "run_experiment",
    "sample_posterior",
    "save_elevation_grid",
    "summarize",
    "true_disk_mean",
    "true_interval_mean",
    "true_smoothed_gradient",
    "write_records",
]
