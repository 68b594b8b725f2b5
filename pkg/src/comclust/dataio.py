"""Synthetic imbalanced dataset generation, CSV ingestion, and the
stratified 75/12.5/12.5 split."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import make_rng
from .errors import (InvalidSpecError, MissingColumnError, ParseError,
                     TooFewSamplesError)

TRAIN, VAL, TEST = "train", "val", "test"
SPLIT_FRACTIONS = (0.75, 0.125, 0.125)


@dataclass
class LabeledDataset:
    features: np.ndarray            # (Z, D)
    labels: np.ndarray              # (Z,) with 0 = majority, 1 = minority
    splits: np.ndarray = field(default=None)   # per-row tag or None

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, split: str) -> tuple:
        if self.splits is None:
            raise ValueError("dataset has not been split")
        idx = np.flatnonzero(self.splits == split)
        return self.features[idx], self.labels[idx]


@dataclass(frozen=True)
class BlobSpec:
    """Two isotropic Gaussian blobs with controllable imbalance.

    ``separation`` is the distance between class means in units of sigma;
    the sweep default of 2.5 gives partially overlapping classes so AUC
    stays informative.
    """
    n_maj: int
    n_min: int
    dim: int = 8
    separation: float = 2.5
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (self.n_maj >= self.n_min >= 1):
            raise InvalidSpecError("need n_maj >= n_min >= 1")
        if self.sigma <= 0 or self.dim < 1:
            raise InvalidSpecError("sigma must be positive and dim >= 1")


def synth_imbalanced(spec: BlobSpec) -> LabeledDataset:
    """Sample the two blobs, ``separation * sigma`` apart in feature space.

    The class means are placed on two orthogonal axes at equal radius, so
    the classes differ in *direction* as well as position; a class centered
    at the origin (or two means on a shared ray) would be invisible to
    cosine geometry. Deterministic per seed.
    """
    if spec.dim < 2:
        raise InvalidSpecError("need dim >= 2 for two mean directions")
    rng = make_rng(spec.seed)
    radius = spec.separation * spec.sigma / np.sqrt(2.0)
    mu_maj = np.zeros(spec.dim)
    mu_maj[0] = radius
    mu_min = np.zeros(spec.dim)
    mu_min[-1] = radius
    x_maj = rng.normal(0.0, spec.sigma, size=(spec.n_maj, spec.dim)) + mu_maj
    x_min = rng.normal(0.0, spec.sigma, size=(spec.n_min, spec.dim)) + mu_min
    features = np.vstack([x_maj, x_min])
    labels = np.concatenate([np.zeros(spec.n_maj, dtype=int),
                             np.ones(spec.n_min, dtype=int)])
    return LabeledDataset(features, labels)


def split_dataset(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Assign 75/12.5/12.5 train/val/test tags, stratified per class with a
    seeded shuffle so both classes land in train whenever counts permit."""
    z = dataset.n_samples
    if z < 8:
        raise TooFewSamplesError(f"need at least 8 samples to split, got {z}")
    rng = make_rng(seed)
    tags = np.empty(z, dtype=object)
    for cls in np.unique(dataset.labels):
        idx = np.flatnonzero(dataset.labels == cls)
        rng.shuffle(idx)
        n = len(idx)
        n_train = int(round(SPLIT_FRACTIONS[0] * n))
        n_val = int(round(SPLIT_FRACTIONS[1] * n))
        # keep at least one training sample per class; give val/test their
        # share only when enough samples remain
        n_train = max(1, min(n_train, n))
        n_val = min(n_val, n - n_train)
        tags[idx[:n_train]] = TRAIN
        tags[idx[n_train:n_train + n_val]] = VAL
        tags[idx[n_train + n_val:]] = TEST
    return LabeledDataset(dataset.features, dataset.labels,
                          np.asarray(tags, dtype=object))


def save_csv(path, dataset: LabeledDataset) -> None:
    d = dataset.n_features
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(d)] + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def load_csv(path) -> LabeledDataset:
    """Read a `f0,...,f{D-1},label` CSV; labels must be 0 or 1 and all
    feature cells finite numbers. Errors name the offending line."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        d = len(header) - 1
        expected = [f"f{i}" for i in range(d)] + ["label"]
        if d < 1 or header != expected:
            raise MissingColumnError(
                f"{path}: header must be f0,...,f{{D-1}},label, got {header}")
        features, labels = [], []
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != d + 1:
                raise ParseError(f"{path}:{lineno}: expected {d + 1} cells, "
                                 f"got {len(cells)}")
            try:
                row = [float(c) for c in cells[:d]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(row)):
                raise ParseError(f"{path}:{lineno}: non-finite feature value")
            if cells[d] not in ("0", "1"):
                raise ParseError(f"{path}:{lineno}: label must be 0 or 1, "
                                 f"got {cells[d]!r}")
            features.append(row)
            labels.append(int(cells[d]))
    if not features:
        raise ParseError(f"{path}: no data rows")
    return LabeledDataset(np.array(features, dtype=np.float64),
                          np.array(labels, dtype=int))


def save_results(path, record: dict) -> None:
    """Write a results record as canonical JSON (sorted keys, fixed float
    repr) so identical runs produce byte-identical files."""
    with open(path, "w") as fh:
        json.dump(_jsonable(record), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_results(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
