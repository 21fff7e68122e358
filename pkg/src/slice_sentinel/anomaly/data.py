"""Datasets for the traffic classifiers: CSV loading, quantile binning and a
seeded synthetic flow-feature generator."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .base import ParamsMixin, check_features_labels, check_fitted, check_matrix


@dataclass
class Dataset:
    features: np.ndarray  # (n_rows, n_features)
    labels: np.ndarray  # 0 = benign, 1 = attack
    feature_names: list[str]

    def __post_init__(self) -> None:
        self.features, self.labels = check_features_labels(self.features, self.labels)
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError(
                f"{len(self.feature_names)} names for {self.features.shape[1]} features"
            )

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def arity(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.features[rows], self.labels[rows], list(self.feature_names))

    def select_columns(self, indices) -> "Dataset":
        names = [self.feature_names[i] for i in indices]
        return Dataset(self.features[:, list(indices)], self.labels, names)


def load_csv(path) -> Dataset:
    """Read a dataset CSV: header of feature names plus a ``label`` column."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if "label" not in header:
            raise ValueError("dataset CSV needs a 'label' column")
        label_idx = header.index("label")
        names = [h for i, h in enumerate(header) if i != label_idx]
        rows, labels = [], []
        for record in reader:
            if not record:
                continue
            labels.append(int(float(record[label_idx])))
            rows.append([float(v) for i, v in enumerate(record) if i != label_idx])
    return Dataset(np.array(rows, dtype=float), np.array(labels, dtype=int), names)


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.feature_names + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([f"{v:.6g}" for v in row] + [int(label)])


def synthetic_flow_dataset(
    n_rows: int = 2000,
    seed: int = 0,
    attack_fraction: float = 0.5,
    n_noise_features: int = 2,
) -> Dataset:
    """Seeded generator of flow feature vectors with a shifted attack class.

    Benign traffic sits around moderate packet and byte rates; attack rows
    are drawn from clearly higher-rate, shorter-duration distributions, plus
    a few pure-noise columns that carry no class signal.
    """
    rng = np.random.default_rng(seed)
    n_attack = int(round(n_rows * attack_fraction))
    n_benign = n_rows - n_attack

    def benign():
        return np.column_stack(
            [
                rng.normal(60, 12, n_benign),     # packet_rate
                rng.normal(8_000, 1_500, n_benign),  # byte_rate
                rng.normal(0.9, 0.25, n_benign),  # flag_entropy
                rng.normal(500, 120, n_benign),   # duration_ms
            ]
        )

    def attack():
        return np.column_stack(
            [
                rng.normal(900, 90, n_attack),
                rng.normal(90_000, 9_000, n_attack),
                rng.normal(2.6, 0.3, n_attack),
                rng.normal(80, 20, n_attack),
            ]
        )

    features = np.vstack([benign(), attack()])
    labels = np.concatenate([np.zeros(n_benign, dtype=int), np.ones(n_attack, dtype=int)])
    names = ["packet_rate", "byte_rate", "flag_entropy", "duration_ms"]
    for i in range(n_noise_features):
        features = np.column_stack([features, rng.uniform(0, 1, n_rows)])
        names.append(f"noise_{i}")
    order = rng.permutation(n_rows)
    return Dataset(features[order], labels[order], names)


class EqualFrequencyBinner(ParamsMixin):
    """Quantile binning of continuous features into integer categories."""

    def __init__(self, n_bins: int = 10):
        self.n_bins = n_bins

    def fit(self, X, y=None) -> "EqualFrequencyBinner":
        X = check_matrix(X)
        if self.n_bins < 2:
            raise ValueError("n_bins must be at least 2")
        quantiles = np.linspace(0, 1, self.n_bins + 1)[1:-1]
        self.edges_ = [np.quantile(X[:, j], quantiles) for j in range(X.shape[1])]
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, "edges_")
        X = check_matrix(X)
        if X.shape[1] != len(self.edges_):
            raise ValueError(
                f"binner fitted on {len(self.edges_)} features, got {X.shape[1]}"
            )
        out = np.empty_like(X, dtype=int)
        for j, edges in enumerate(self.edges_):
            out[:, j] = np.searchsorted(edges, X[:, j], side="right")
        return out

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)


def binned_dataset(dataset: Dataset, n_bins: int = 10) -> tuple[Dataset, EqualFrequencyBinner]:
    binner = EqualFrequencyBinner(n_bins=n_bins)
    binned = binner.fit_transform(dataset.features)
    return Dataset(binned, dataset.labels, list(dataset.feature_names)), binner


def train_test_split(dataset: Dataset, test_fraction: float = 0.3, seed: int = 0):
    """Deterministic shuffled split; the seed fixes the permutation."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(dataset.n_rows)
    n_test = max(1, int(round(dataset.n_rows * test_fraction)))
    test_rows, train_rows = order[:n_test], order[n_test:]
    if len(train_rows) == 0:
        raise ValueError("split leaves no training rows")
    return dataset.subset(train_rows), dataset.subset(test_rows)
