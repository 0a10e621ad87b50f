"""Optimal measurement designs for sparse longitudinal and functional data.

Fit a mean/covariance model from irregular noisy observations, then choose
the p time points that best recover latent trajectories or predict a scalar
response, with exhaustive or greedy search over a grid.
"""

__version__ = "0.1.0"

from .data import (
    Design,
    Domain,
    Grid,
    ResponseVector,
    SparseSample,
    SubjectRecord,
    load_longitudinal,
    load_responses,
    make_grid,
    write_longitudinal,
    write_responses,
)
from .smoothing import (
    KERNELS,
    Bandwidths,
    CurveEstimate,
    Kernel,
    SurfaceEstimate,
    estimate_auto_cov_raw,
    estimate_cross_cov,
    estimate_mean,
    estimate_noise_variance,
    local_linear_1d,
    local_linear_2d,
    select_bandwidth,
)
from .model import (
    BetaCurve,
    EigenSystem,
    FitConfig,
    ModelFit,
    apply_ridge,
    eigendecompose,
    estimate_beta,
    fit_model,
    project_psd,
)
from .predict import (
    ObservedDesignValues,
    RecoveredTrajectory,
    predict_response,
    predict_responses,
    recover_trajectories,
    recover_trajectory,
)
from .criteria import (
    CriterionResult,
    DesignEvaluator,
    FeasibilityPolicy,
    criterion_response,
    criterion_trajectory,
    default_policy,
    feasibility,
)
from .search import (
    EarliestDesignResult,
    SearchResult,
    earliest_design,
    exhaustive_search,
    greedy_search,
    random_designs,
)
from .validation import (
    MetricReport,
    RidgeSelection,
    ape_metric,
    are_metric,
    select_ridge_cv,
    select_ridge_modified_cv,
)
from .simulation import (
    BenchmarkReport,
    ScenarioSpec,
    SyntheticTruth,
    generate_dataset,
    population_model,
    run_benchmark,
)
from .consistency import ConvergenceReport, convergence_study, design_distance
from .errors import (
    ConditioningError,
    DataFormatError,
    RidgeSelectionError,
    SearchError,
    SmoothingError,
    SparseDesignError,
)
