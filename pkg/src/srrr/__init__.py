"""Sparse reduced-rank multi-response regression.

Estimates a jointly sparse and low-rank coefficient matrix by peeling
off unit-rank factors one at a time, each obtained from a sparse
generalized eigenvalue problem on the deflated residual. Includes rank
selection by an information criterion, support recovery by hard
thresholding, a synthetic benchmark harness, and VAR-based influence
network inference.
"""

from .estimator import (
    FitConfig,
    FitResult,
    UnitRankFactor,
    coefficient_at_rank,
    deflate,
    extract_unit_rank,
    fit,
    fit_and_select,
    predict,
    refit_core,
)
from .linalg import EigenPair, dominant_eigpair, gram, cross_moment, top_r_svd
from .selection import (
    RankSelection,
    ThresholdRule,
    gic,
    hard_threshold,
    loss,
    recover_supports,
    select_rank,
    tune_threshold_cv,
)
from .simulate import (
    GroundTruth,
    MetricsReport,
    SimSpec,
    ar1_cov,
    gen_coefficient,
    gen_dataset,
    normalized_estimation_error,
    normalized_prediction_error,
    rank_recovery_error,
    run_replications,
    support_auc,
)
from .sparse_eig import (
    SparseEigResult,
    SparsityRule,
    sparse_gen_eig_fast,
    sparse_gen_eig_ridge,
    truncate,
    truncated_power,
)
from .var_network import (
    InfluenceGraph,
    VarSpec,
    evaluate_graph,
    fit_var_network,
    influence_scores,
    lag_embed,
    simulate_var,
)

__version__ = "0.1.0"

__all__ = [
    "EigenPair",
    "FitConfig",
    "FitResult",
    "GroundTruth",
    "InfluenceGraph",
    "MetricsReport",
    "RankSelection",
    "SimSpec",
    "SparseEigResult",
    "SparsityRule",
    "ThresholdRule",
    "UnitRankFactor",
    "VarSpec",
    "ar1_cov",
    "coefficient_at_rank",
    "cross_moment",
    "deflate",
    "dominant_eigpair",
    "evaluate_graph",
    "extract_unit_rank",
    "fit",
    "fit_and_select",
    "fit_var_network",
    "gen_coefficient",
    "gen_dataset",
    "gic",
    "gram",
    "hard_threshold",
    "influence_scores",
    "lag_embed",
    "loss",
    "normalized_estimation_error",
    "normalized_prediction_error",
    "predict",
    "rank_recovery_error",
    "recover_supports",
    "refit_core",
    "run_replications",
    "select_rank",
    "simulate_var",
    "support_auc",
    "top_r_svd",
    "truncate",
    "truncated_power",
    "tune_threshold_cv",
    "__version__",
]
