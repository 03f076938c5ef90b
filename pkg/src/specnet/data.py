"""Feature matrices, labels, normalization and train/validation splits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError, ShapeError, ValidationError
from .io import check_finite, read_csv_matrix, read_matrix


@dataclass(frozen=True)
class FeatureMatrix:
    """L samples (rows) by N features (columns)."""

    values: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeError(f"feature matrix must be 2-d and non-empty, got {values.shape}")
        check_finite(values, "feature matrix")
        if self.feature_names is not None and len(self.feature_names) != values.shape[1]:
            raise ShapeError(
                f"{len(self.feature_names)} feature names for {values.shape[1]} columns"
            )
        object.__setattr__(self, "values", values)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabeledDataset:
    """Features plus targets.

    Classification labels are 1-based integers in ``[1, n_classes]``;
    regression targets are arbitrary reals and ``n_classes`` is ``None``.
    """

    features: FeatureMatrix
    targets: np.ndarray
    task: str = "classification"
    n_classes: int | None = None

    def __post_init__(self):
        if self.task not in ("classification", "regression"):
            raise DomainError(f"unknown task {self.task!r}")
        targets = np.asarray(self.targets)
        if targets.ndim != 1 or len(targets) != self.features.n_samples:
            raise ShapeError(
                f"{targets.shape} targets for {self.features.n_samples} samples"
            )
        if self.task == "classification":
            if not np.all(targets == np.round(targets)):
                raise ValidationError("classification labels must be integers")
            targets = targets.astype(np.int64)
            n_classes = self.n_classes if self.n_classes is not None else int(targets.max())
            if targets.min() < 1 or targets.max() > n_classes:
                raise ValidationError(f"labels must lie in [1, {n_classes}]")
            object.__setattr__(self, "n_classes", n_classes)
        else:
            targets = targets.astype(np.float64)
            check_finite(targets, "regression targets")
            object.__setattr__(self, "n_classes", None)
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return self.features.n_samples

    @property
    def X(self) -> np.ndarray:
        return self.features.values

    def subset(self, index) -> "LabeledDataset":
        names = self.features.feature_names
        return LabeledDataset(
            FeatureMatrix(self.X[index], names), self.targets[index], self.task, self.n_classes
        )


@dataclass(frozen=True)
class SplitSpec:
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise DomainError("validation_fraction must lie in (0, 1)")


def load_matrix(path, format: str = "csv") -> FeatureMatrix:
    if format == "csv":
        values, names = read_csv_matrix(path)
    elif format == "binary":
        values, names = read_matrix(path), None
    else:
        raise DomainError(f"unknown matrix format {format!r} (use 'csv' or 'binary')")
    return FeatureMatrix(values, names)


def load_labels(path, task: str = "classification", n_classes: int | None = None) -> np.ndarray:
    """Read a sidecar labels file, one target per line."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.strip()
            if not tok:
                continue
            try:
                out.append(float(tok))
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: cannot parse label {tok!r}") from None
    if not out:
        raise ParseError(f"{path}: no labels")
    values = np.array(out)
    check_finite(values, "labels")
    return values.astype(np.int64) if task == "classification" else values


def load_dataset(features_path, labels_path, format="csv", task="classification",
                 n_classes=None) -> LabeledDataset:
    features = load_matrix(features_path, format)
    targets = load_labels(labels_path, task)
    return LabeledDataset(features, targets, task, n_classes)


def load_merck_csv(path) -> LabeledDataset:
    """Load a Merck Molecular Activity Challenge file.

    The expected layout is the challenge's: header ``MOLECULE,Act,D_1,...``,
    then one row per molecule. The molecule id column is dropped and ``Act``
    becomes the regression target.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) < 3 or header[1].strip() != "Act":
            raise ParseError(f"{path}: expected header 'MOLECULE,Act,<descriptors...>'")
        names = [h.strip() for h in header[2:]]
        targets, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}: line {lineno} has {len(rec)} fields, expected {len(header)}")
            try:
                targets.append(float(rec[1]))
                rows.append([float(v) for v in rec[2:]])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return LabeledDataset(FeatureMatrix(np.array(rows), names), np.array(targets), "regression")


def log_normalize(X: FeatureMatrix) -> FeatureMatrix:
    """Entry-wise ``log(1 + x)`` for count data."""
    if np.any(X.values < 0):
        idx = tuple(int(i) for i in np.argwhere(X.values < 0)[0])
        raise DomainError(f"log_normalize needs non-negative entries; found one at {idx}")
    return FeatureMatrix(np.log1p(X.values), X.feature_names)


def zscore_normalize(X: FeatureMatrix, means=None, stds=None):
    """Standardize columns using population statistics.

    Zero-variance columns are only centered, and their std is reported as 0.
    Passing ``means``/``stds`` reapplies statistics fitted elsewhere.
    """
    values = X.values
    if means is None:
        if values.shape[0] < 2:
            raise DomainError("zscore_normalize needs at least 2 samples")
        means = values.mean(axis=0)
        stds = values.std(axis=0)
        stds = np.where(stds > 0, stds, 0.0)
    means = np.asarray(means, dtype=np.float64)
    stds = np.asarray(stds, dtype=np.float64)
    scale = np.where(stds > 0, stds, 1.0)
    return FeatureMatrix((values - means) / scale, X.feature_names), means, stds


def validation_size(n: int, fraction: float) -> int:
    # floor, with a guard against products like 0.57 * 100 = 56.99999999999999
    size = math.floor(n * fraction + 1e-9)
    return min(max(size, 1), n - 1)


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise DomainError("need at least 2 samples to split")
    n_val = validation_size(n, spec.validation_fraction)
    perm = np.random.default_rng(spec.seed).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def split(ds: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    train_idx, val_idx = split_indices(len(ds), spec)
    return ds.subset(train_idx), ds.subset(val_idx)


@dataclass
class Normalizer:
    """The preprocessing pipeline, recorded so it can be replayed at evaluation time.

    ``steps`` is an ordered list drawn from ``"log"`` and ``"zscore"``.
    """

    steps: list[str] = field(default_factory=list)
    means: np.ndarray | None = None
    stds: np.ndarray | None = None

    def __post_init__(self):
        for step in self.steps:
            if step not in ("log", "zscore"):
                raise DomainError(f"unknown normalization step {step!r}")

    def fit_transform(self, X: FeatureMatrix) -> FeatureMatrix:
        for step in self.steps:
            if step == "log":
                X = log_normalize(X)
            else:
                X, self.means, self.stds = zscore_normalize(X)
        return X

    def transform(self, X: FeatureMatrix) -> FeatureMatrix:
        for step in self.steps:
            if step == "log":
                X = log_normalize(X)
            else:
                if self.means is None:
                    raise ValidationError("zscore statistics were never fitted")
                X, _, _ = zscore_normalize(X, self.means, self.stds)
        return X

    def to_dict(self) -> dict:
        return {
            "steps": list(self.steps),
            "means": None if self.means is None else self.means.tolist(),
            "stds": None if self.stds is None else self.stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        norm = cls(list(d["steps"]))
        if d.get("means") is not None:
            norm.means = np.array(d["means"])
            norm.stds = np.array(d["stds"])
        return norm
