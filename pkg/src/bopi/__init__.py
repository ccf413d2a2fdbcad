"""Bounded Oscillation Prediction Intervals (BOPI) for local linear
regression, with the conventional and OLS baselines, evaluation metrics
and a synthetic benchmark harness."""

from .distributions import (
    DomainError,
    chi_square_cdf,
    chi_square_quantile,
    std_normal_cdf,
    std_normal_quantile,
    student_t_cdf,
    student_t_quantile,
)
from .intervals import (
    Interval,
    IntervalBand,
    SampleSummary,
    conventional_interval,
    min_n_for_containment,
    normal_prediction_interval,
    normal_tolerance_interval,
    prediction_factor,
    tolerance_factor,
    tolerance_prediction_ratio,
)
from .llr import (
    DataError,
    Dataset,
    ErrorSet,
    KdTreeIndex,
    LoessModel,
    cv_prediction_errors,
    encode_dataset,
    fit_local,
    fit_ols,
    knn,
    ols_band,
    ols_predict,
    ols_prediction_interval,
    predict,
    predict_many,
    select_bandwidth,
    tricube_weights,
)
from .metrics import (
    EvaluationReport,
    coverage,
    egsd,
    mis,
    normalize_egsd,
    paired_t_test,
    summarize_methods,
    wilson_critical,
)
from .prediction import (
    AdaptiveNeighborhood,
    FixedNeighborhood,
    TuningResult,
    a_bopi_band,
    a_bopi_interval,
    conventional_band,
    error_tolerance_interval,
    eset,
    f_bopi_band,
    f_bopi_interval,
    tune_hyperparams,
)
from .simulate import DgpSpec, SimHyper, SimulationResult, friedman1, friedman2, run_simulation
from .verify import check_containment_grid, check_containment_table, gamma_floor

__version__ = "0.1.0"
