"""Traffic anomaly classifiers behind the flow validator: chi-square feature
selection, naive Bayes, a gain-ratio decision tree and their evaluation."""

from .base import ParamsMixin, check_features_labels, check_matrix
from .classifiers import DecisionTree, NaiveBayesClassifier
from .data import (
    Dataset,
    EqualFrequencyBinner,
    binned_dataset,
    load_csv,
    save_csv,
    synthetic_flow_dataset,
    train_test_split,
)
from .features import (
    ChiSquareSelector,
    backward_elimination_ranking,
    chi_square_ranking,
    chi_square_score,
    select_features,
)
from .metrics import (
    EvalMetrics,
    auc_from_points,
    evaluate,
    rate_identities_hold,
    roc_points,
)

__all__ = [
    "ChiSquareSelector",
    "Dataset",
    "DecisionTree",
    "EqualFrequencyBinner",
    "EvalMetrics",
    "NaiveBayesClassifier",
    "ParamsMixin",
    "auc_from_points",
    "backward_elimination_ranking",
    "binned_dataset",
    "check_features_labels",
    "check_matrix",
    "chi_square_ranking",
    "chi_square_score",
    "evaluate",
    "load_csv",
    "rate_identities_hold",
    "roc_points",
    "save_csv",
    "select_features",
    "synthetic_flow_dataset",
    "train_test_split",
]
