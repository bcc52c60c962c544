"""Evaluation and challenge-style ranking of multi-class 3D segmentations."""

from .cohort import CaseMeta, Manifest, compare_splits, filter_cases, load_manifest
from .estimators import ChallengeRanker, RankingStability, SegmentationScorer
from .metrics import (
    LabelMetrics,
    boundary,
    directed_hausdorff,
    distance_transform,
    dsc,
    evaluate_case,
    extract_mask,
    hausdorff,
    hausdorff_percentile,
    icv_percent_difference,
    intracranial_volume,
    volume_similarity,
)
from .ranking import (
    RankingTable,
    RankScheme,
    challenge_ranking,
    combined_ranking,
    per_label_ranking,
    rank_values,
    ranking_method_sweep,
    subset_ranking,
    substitute_missing,
)
from .records import MetricRecord, MetricTable
from .stats import (
    bootstrap_ranking,
    gwet_ac,
    holm_adjust,
    kendall_tau,
    ks_two_sample,
    median_ordinal,
    significance_matrix,
    wilcoxon_one_sided,
)
from .volume_io import DEFAULT_SCHEME, LabelScheme, LabelVolume, parse_nifti, read_nifti, validate_labels, write_nifti

__version__ = "0.1.0"

__all__ = [
    "CaseMeta",
    "Manifest",
    "compare_splits",
    "filter_cases",
    "load_manifest",
    "ChallengeRanker",
    "RankingStability",
    "SegmentationScorer",
    "LabelMetrics",
    "boundary",
    "directed_hausdorff",
    "distance_transform",
    "dsc",
    "evaluate_case",
    "extract_mask",
    "hausdorff",
    "hausdorff_percentile",
    "icv_percent_difference",
    "intracranial_volume",
    "volume_similarity",
    "RankingTable",
    "RankScheme",
    "challenge_ranking",
    "combined_ranking",
    "per_label_ranking",
    "rank_values",
    "ranking_method_sweep",
    "subset_ranking",
    "substitute_missing",
    "MetricRecord",
    "MetricTable",
    "bootstrap_ranking",
    "gwet_ac",
    "holm_adjust",
    "kendall_tau",
    "ks_two_sample",
    "median_ordinal",
    "significance_matrix",
    "wilcoxon_one_sided",
    "DEFAULT_SCHEME",
    "LabelScheme",
    "LabelVolume",
    "parse_nifti",
    "read_nifti",
    "validate_labels",
    "write_nifti",
]
