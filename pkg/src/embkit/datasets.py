"""Dataset container, delimited-file loading, and the synthetic generator."""

from dataclasses import dataclass

import numpy as np


class DatasetFormatError(ValueError):
    """A dataset file failed to parse; the message names the offending row."""


@dataclass(frozen=True)
class Dataset:
    """Labeled feature vectors: features (N, dim) float64, labels (N,) int."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (N, dim) aligned with labels")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def class_ids(self):
        return np.unique(self.labels)

    @property
    def by_class(self):
        """Class id -> array of example indices (cached on first use)."""
        cached = getattr(self, "_by_class", None)
        if cached is None:
            cached = {int(c): np.flatnonzero(self.labels == c)
                      for c in self.class_ids}
            object.__setattr__(self, "_by_class", cached)
        return cached

    def subset(self, idx):
        return Dataset(self.features[idx], self.labels[idx])

    def split_by_class(self, eval_fraction=0.2):
        """Deterministic class-level split: the last classes (sorted by id)
        become the held-out evaluation set, mirroring unseen-class retrieval
        protocols."""
        classes = self.class_ids
        n_eval = max(1, round(eval_fraction * len(classes)))
        if n_eval >= len(classes):
            raise ValueError("evaluation split would consume every class")
        eval_classes = set(int(c) for c in classes[-n_eval:])
        eval_mask = np.isin(self.labels, list(eval_classes))
        return self.subset(~eval_mask), self.subset(eval_mask)


def synthetic_dataset(classes, per_class, dim, spread, seed, radius=1.0):
    """Gaussian class clusters around centers drawn uniformly on a sphere."""
    if classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((classes, dim))
    centers *= radius / np.linalg.norm(centers, axis=1, keepdims=True)
    feats = np.repeat(centers, per_class, axis=0)
    feats = feats + spread * rng.standard_normal(feats.shape)
    labels = np.repeat(np.arange(classes), per_class)
    return Dataset(feats, labels.astype(np.intp))


def load_dataset_file(path):
    """Parse a delimited text dataset: class id, then feature values per row.

    Commas or whitespace delimit fields; a single header row is allowed.
    Raises DatasetFormatError naming the first bad row.
    """
    labels = []
    rows = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f for f in line.replace(",", " ").split() if f]
            try:
                values = [float(f) for f in fields]
            except ValueError:
                if lineno == 1:  # header row
                    continue
                raise DatasetFormatError(
                    f"{path}: row {lineno}: non-numeric field") from None
            if len(values) < 2:
                raise DatasetFormatError(
                    f"{path}: row {lineno}: need a class id and features")
            label = values[0]
            if label != int(label):
                raise DatasetFormatError(
                    f"{path}: row {lineno}: class id must be an integer")
            if dim is None:
                dim = len(values) - 1
            elif len(values) - 1 != dim:
                raise DatasetFormatError(
                    f"{path}: row {lineno}: expected {dim} features, "
                    f"got {len(values) - 1}")
            labels.append(int(label))
            rows.append(values[1:])
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    ds = Dataset(np.asarray(rows, dtype=np.float64),
                 np.asarray(labels, dtype=np.intp))
    if len(ds.class_ids) < 2:
        raise DatasetFormatError(f"{path}: need at least 2 classes")
    return ds


def write_dataset_file(path, dataset, header=True):
    """Write the companion format of load_dataset_file (CSV)."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            cols = ",".join(f"x{k}" for k in range(dataset.dim))
            fh.write(f"class,{cols}\n")
        for label, row in zip(dataset.labels, dataset.features):
            fh.write(f"{int(label)}," + ",".join(repr(v) for v in row) + "\n")
