"""Feature scoring and selection: chi-square ranking plus a wrapper-based
backward elimination ensemble."""

from __future__ import annotations

import numpy as np

from .base import ParamsMixin, check_features_labels, check_fitted, check_matrix


def chi_square_score(column, labels) -> float:
    """Chi-square statistic of one binned feature against the binary label.

    Computed straight off the category-by-label contingency table.  A constant
    column, or a single-label dataset, scores 0 by convention.
    """
    column = np.asarray(column)
    labels = np.asarray(labels)
    if column.size == 0 or labels.size == 0:
        raise ValueError("chi-square needs non-empty inputs")
    if column.shape[0] != labels.shape[0]:
        raise ValueError("column and labels must have the same length")
    categories = np.unique(column)
    classes = np.unique(labels)
    if len(categories) < 2 or len(classes) < 2:
        return 0.0
    table = np.zeros((len(categories), len(classes)))
    cat_index = {c: i for i, c in enumerate(categories)}
    cls_index = {c: i for i, c in enumerate(classes)}
    for value, label in zip(column, labels):
        table[cat_index[value], cls_index[label]] += 1
    total = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / total
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(expected > 0, (table - expected) ** 2 / expected, 0.0)
    return float(terms.sum())


def chi_square_ranking(X, y) -> list[int]:
    """Feature indices ordered best first; ties break toward the lower index."""
    X, y = check_features_labels(X, y)
    scores = [chi_square_score(X[:, j], y) for j in range(X.shape[1])]
    return sorted(range(X.shape[1]), key=lambda j: (-scores[j], j))


class ChiSquareSelector(ParamsMixin):
    """Keep the k best features by chi-square score."""

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y) -> "ChiSquareSelector":
        X, y = check_features_labels(X, y)
        if not 1 <= self.k <= X.shape[1]:
            raise ValueError(f"k must be in 1..{X.shape[1]}, got {self.k}")
        self.scores_ = np.array([chi_square_score(X[:, j], y) for j in range(X.shape[1])])
        ranking = sorted(range(X.shape[1]), key=lambda j: (-self.scores_[j], j))
        self.selected_ = sorted(ranking[: self.k])
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, "selected_")
        return check_matrix(X)[:, self.selected_]

    def fit_transform(self, X, y) -> np.ndarray:
        return self.fit(X, y).transform(X)


def _holdout_accuracy(X, y, columns, train_rows, test_rows) -> float:
    from .classifiers import NaiveBayesClassifier

    cols = list(columns)
    model = NaiveBayesClassifier().fit(X[np.ix_(train_rows, cols)], y[train_rows])
    predictions = model.predict(X[np.ix_(test_rows, cols)])
    return float(np.mean(predictions == y[test_rows]))


def backward_elimination_ranking(X, y, candidates: list[int], seed: int = 0) -> dict[int, int]:
    """Wrapper ranking: repeatedly drop the feature whose removal helps (or
    hurts least) a held-out classifier.  Rank 0 is the longest survivor."""
    X, y = check_features_labels(X, y)
    rng = np.random.default_rng(seed)
    order = rng.permutation(X.shape[0])
    n_test = max(1, int(round(X.shape[0] * 0.3)))
    test_rows, train_rows = order[:n_test], order[n_test:]
    if len(set(y[train_rows].tolist())) < 2:
        # Degenerate split: fall back to keeping the chi-square order.
        return {f: i for i, f in enumerate(candidates)}

    remaining = list(candidates)
    removal_order: list[int] = []
    while len(remaining) > 1:
        best_feature, best_acc = None, -1.0
        for feature in remaining:
            trial = [f for f in remaining if f != feature]
            acc = _holdout_accuracy(X, y, trial, train_rows, test_rows)
            # ties: prefer removing the higher index, keeping low indices longer
            if acc > best_acc or (acc == best_acc and feature > best_feature):
                best_feature, best_acc = feature, acc
        remaining.remove(best_feature)
        removal_order.append(best_feature)
    ranks: dict[int, int] = {remaining[0]: 0}
    for position, feature in enumerate(reversed(removal_order), start=1):
        ranks[feature] = position
    return ranks


def select_features(X, y, k: int, method: str = "chi2", seed: int = 0) -> list[int]:
    """Pick k feature indices.

    ``chi2``: top k by chi-square, ties toward the lower index.
    ``ensemble``: chi-square shortlist of 2k candidates, re-ranked by the sum
    of chi-square rank and backward-elimination rank.
    """
    X, y = check_features_labels(X, y)
    arity = X.shape[1]
    if not 1 <= k <= arity:
        raise ValueError(f"k must be in 1..{arity}, got {k}")
    chi_order = chi_square_ranking(X, y)
    if method == "chi2":
        return sorted(chi_order[:k])
    if method == "ensemble":
        pool = chi_order[: min(2 * k, arity)]
        chi_rank = {f: i for i, f in enumerate(pool)}
        elim_rank = backward_elimination_ranking(X, y, pool, seed=seed)
        return sorted(
            sorted(pool, key=lambda f: (chi_rank[f] + elim_rank[f], f))[:k]
        )
    raise ValueError(f"unknown selection method {method!r}")
