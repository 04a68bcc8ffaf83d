"""Targeted subset selection over precomputed feature matrices."""

from .analysis import QuantileAssignment, jaccard, spearman, stratify_quantiles, sub_stratify, subset_query_w1
from .estimators import SubsetSelector
from .features import (
    AdamHyper,
    AdamState,
    ProjectionSpec,
    adam_update,
    position_weighted_pool,
    project_features,
    rademacher_project,
)
from .io import load_features, write_features
from .selection import (
    KnnParams,
    SelectionResult,
    UotParams,
    select_doubly_greedy,
    select_from_features,
    select_knn_kde,
    select_knn_uniform,
    select_round_robin,
    select_uot,
)
from .similarity import (
    CheckpointFeatureStore,
    cosine_similarity,
    load_checkpoint_store,
    pairwise_cosine,
    pairwise_l2,
    similarity_to_cost,
    weighted_checkpoint_similarity,
)
from .simulate import (
    DecayReport,
    SyntheticPoolSpec,
    brute_force_min_w1_subset,
    decomposition_check,
    empirical_w1_decay,
    mcdiarmid_coverage,
    sample_random_multiset,
)
from .transport import ConvergenceError, OracleSizeError, TransportPlan, exact_w1, sinkhorn, sinkhorn_unbalanced

__version__ = "0.1.0"

__all__ = [
    "AdamHyper",
    "AdamState",
    "CheckpointFeatureStore",
    "ConvergenceError",
    "DecayReport",
    "KnnParams",
    "OracleSizeError",
    "ProjectionSpec",
    "QuantileAssignment",
    "SelectionResult",
    "SubsetSelector",
    "SyntheticPoolSpec",
    "TransportPlan",
    "UotParams",
    "adam_update",
    "brute_force_min_w1_subset",
    "cosine_similarity",
    "decomposition_check",
    "empirical_w1_decay",
    "exact_w1",
    "jaccard",
    "load_checkpoint_store",
    "load_features",
    "mcdiarmid_coverage",
    "pairwise_cosine",
    "pairwise_l2",
    "position_weighted_pool",
    "project_features",
    "rademacher_project",
    "sample_random_multiset",
    "select_doubly_greedy",
    "select_from_features",
    "select_knn_kde",
    "select_knn_uniform",
    "select_round_robin",
    "select_uot",
    "similarity_to_cost",
    "sinkhorn",
    "sinkhorn_unbalanced",
    "spearman",
    "stratify_quantiles",
    "sub_stratify",
    "subset_query_w1",
    "weighted_checkpoint_similarity",
    "write_features",
]
