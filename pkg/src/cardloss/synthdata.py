"""Seeded synthetic datasets for class-imbalance experiments.

Each class sits on its own vertex of the hypercube {-sep, +sep}^n_informative
and samples scatter around it with unit-variance Gaussian noise.  Redundant
features are a fixed random linear map of the informative ones.  One class
(index 0) holds a configurable majority share of the samples; the remainder
splits as evenly as possible over the other classes.

Everything is driven by one seeded uniform generator, with normal variates
produced by the Box-Muller transform, so a (spec, seed) pair always yields
the same dataset within this implementation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import CsvFormatError, InvalidArgumentError, InvalidSpecError


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for one synthetic dataset."""

    n_samples: int
    n_classes: int
    n_informative: int
    n_redundant: int
    majority_fraction: float
    class_sep: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidSpecError("n_samples must be at least 1")
        if self.n_classes < 1:
            raise InvalidSpecError("n_classes must be at least 1")
        if self.n_informative < 1:
            raise InvalidSpecError("n_informative must be at least 1")
        if self.n_redundant < 0:
            raise InvalidSpecError("n_redundant must be non-negative")
        if self.n_classes > 2 ** self.n_informative:
            raise InvalidSpecError(
                f"{self.n_classes} classes need distinct vertices but the "
                f"{self.n_informative}-cube has only {2 ** self.n_informative}")
        if not (math.isfinite(self.class_sep) and self.class_sep > 0):
            raise InvalidSpecError("class_sep must be positive")
        f = self.majority_fraction
        if self.n_classes == 1:
            if f != 1.0:
                raise InvalidSpecError("a single-class dataset needs majority_fraction 1.0")
        elif not (1.0 / self.n_classes < f < 1.0):
            raise InvalidSpecError(
                f"majority_fraction must lie in (1/{self.n_classes}, 1), got {f}")

    @property
    def n_features(self) -> int:
        return self.n_informative + self.n_redundant


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feat = np.asarray(self.features, dtype=np.float64)
        lab = np.asarray(self.labels)
        if feat.ndim != 2 or lab.ndim != 1 or feat.shape[0] != lab.shape[0]:
            raise InvalidArgumentError("features and labels must agree on sample count")
        if feat.shape[0] < 1:
            raise InvalidArgumentError("dataset must contain at least one sample")
        if not np.isfinite(feat).all():
            raise InvalidArgumentError("features must be finite")
        if not np.issubdtype(lab.dtype, np.integer):
            raise InvalidArgumentError("labels must be integers")
        if (lab < 0).any():
            raise InvalidArgumentError("labels must be non-negative")
        object.__setattr__(self, "features", feat)
        object.__setattr__(self, "labels", lab.astype(np.int64))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint train/test partition of one dataset."""

    train: Dataset
    test: Dataset
    split_ratio: float


def per_class_counts(spec: DatasetSpec) -> np.ndarray:
    """Sample count per class: majority first, remainder split evenly."""
    counts = np.zeros(spec.n_classes, dtype=np.int64)
    counts[0] = int(math.floor(spec.majority_fraction * spec.n_samples + 0.5))
    remainder = spec.n_samples - counts[0]
    minority = spec.n_classes - 1
    if minority:
        counts[1:] = remainder // minority
        counts[1:1 + remainder % minority] += 1
    return counts


def _box_muller(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normal variates from uniform draws via Box-Muller."""
    total = int(np.prod(shape))
    pairs = (total + 1) // 2
    u1 = rng.random(pairs)
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return z[:total].reshape(shape)


def _distinct_vertices(rng: np.random.Generator, n_classes: int, dim: int) -> np.ndarray:
    """n_classes distinct sign vectors of the dim-cube, sampled by rejection."""
    seen: set[bytes] = set()
    rows = []
    while len(rows) < n_classes:
        signs = np.where(rng.random(dim) < 0.5, -1.0, 1.0)
        key = signs.tobytes()
        if key not in seen:
            seen.add(key)
            rows.append(signs)
    return np.array(rows)


def generate(spec: DatasetSpec) -> Dataset:
    """Materialize a dataset from its spec, deterministically in the seed."""
    rng = np.random.default_rng(spec.seed)
    vertices = spec.class_sep * _distinct_vertices(rng, spec.n_classes, spec.n_informative)
    linear_map = rng.uniform(-1.0, 1.0, (spec.n_informative, spec.n_redundant))
    noise = _box_muller(rng, (spec.n_samples, spec.n_informative))

    counts = per_class_counts(spec)
    labels = np.repeat(np.arange(spec.n_classes), counts)
    informative = vertices[labels] + noise
    if spec.n_redundant:
        features = np.hstack([informative, informative @ linear_map])
    else:
        features = informative
    return Dataset(features, labels)


def split(data: Dataset, ratio: float, seed: int = 0) -> SplitDataset:
    """Seeded unstratified shuffle split; ``ratio`` is the train share."""
    if not (0.0 < ratio < 1.0):
        raise InvalidArgumentError(f"split ratio must lie in (0, 1), got {ratio}")
    n = data.n_samples
    n_train = int(math.floor(ratio * n + 0.5))
    if n_train == 0 or n_train == n:
        raise InvalidArgumentError(
            f"ratio {ratio} leaves an empty train or test side for {n} samples")
    order = np.random.default_rng(seed).permutation(n)
    train_idx, test_idx = order[:n_train], order[n_train:]
    return SplitDataset(
        train=Dataset(data.features[train_idx], data.labels[train_idx]),
        test=Dataset(data.features[test_idx], data.labels[test_idx]),
        split_ratio=float(ratio),
    )


def save_csv(data: Dataset, path) -> None:
    """Write ``f0..f{d-1},label`` rows; floats keep full round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(data.n_features)] + ["label"])
        for row, lab in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])


def load_csv(path) -> Dataset:
    """Read a dataset written by :func:`save_csv`."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        if len(header) < 2 or header[-1] != "label":
            raise CsvFormatError(f"{path}: header must name feature columns then 'label'")
        width = len(header)
        features, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise CsvFormatError(
                    f"{path}: line {lineno}: expected {width} fields, found {len(row)}")
            try:
                features.append([float(v) for v in row[:-1]])
                labels.append(int(row[-1]))
            except ValueError as err:
                raise CsvFormatError(f"{path}: line {lineno}: {err}") from None
    if not features:
        raise CsvFormatError(f"{path}: no data rows")
    return Dataset(np.array(features), np.array(labels))
