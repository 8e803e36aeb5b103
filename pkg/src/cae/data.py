"""Labelled datasets, CSV ingestion, z-scoring and splitting."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    feature_names: list[str] | None = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1 or d < 1:
            raise DataError(f"need n >= 1 and d >= 1, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        if y.shape != (n,):
            raise DataError(f"labels must have shape ({n},), got {y.shape}")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise DataError("labels must be integers")
        y = y.astype(np.int64)
        if self.num_classes < 2:
            raise DataError("num_classes must be >= 2")
        if y.min() < 0 or y.max() >= self.num_classes:
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        if self.feature_names is not None and len(self.feature_names) != d:
            raise DataError(f"feature_names has {len(self.feature_names)} entries, expected {d}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", list(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows], self.num_classes, self.feature_names)

    def with_features(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, self.labels, self.num_classes, self.feature_names)


@dataclass(frozen=True)
class ScalerParams:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        m = np.array(self.means, dtype=float)
        s = np.array(self.stds, dtype=float)
        if m.shape != s.shape or m.ndim != 1:
            raise DataError("means and stds must be 1-D vectors of equal length")
        if np.any(s < 0):
            raise DataError("stds must be non-negative")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "stds", s)

    @classmethod
    def identity(cls, d: int) -> "ScalerParams":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.means.shape[0]:
            raise DataError(f"scaler fit on d={self.means.shape[0]} features, got shape {X.shape}")
        return (X - self.means) / self.stds


def _parse_label_column(header: list[str], label_column) -> int:
    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.isdigit() and label_column not in header):
        idx = int(label_column)
        if not 0 <= idx < len(header):
            raise DataError(f"label column index {idx} out of range for {len(header)} columns")
        return idx
    hits = [i for i, h in enumerate(header) if h == label_column]
    if not hits:
        raise DataError(f"label column {label_column!r} not found in header")
    if len(hits) > 1:
        raise DataError(f"label column {label_column!r} appears {len(hits)} times in header")
    return hits[0]


def load_csv(path, label_column="label", num_classes: int | None = None) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file (no header row)")
        header = [h.strip() for h in header]
        li = _parse_label_column(header, label_column)
        rows, labels = [], []
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {rowno} has {len(row)} cells, header has {len(header)}")
            values = []
            for col, cell in enumerate(row):
                if col == li:
                    try:
                        lab = int(cell.strip())
                    except ValueError:
                        raise DataError(f"{path}: row {rowno}, column {header[col]!r}: bad label {cell!r}") from None
                    if lab < 0:
                        raise DataError(f"{path}: row {rowno}: negative label {lab}")
                    labels.append(lab)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}: row {rowno}, column {header[col]!r}: cannot parse {cell!r}") from None
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: zero data rows")
    y = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = max(int(y.max()) + 1, 2)
    elif y.max() >= num_classes:
        raise DataError(f"{path}: label {int(y.max())} >= declared num_classes {num_classes}")
    names = [h for i, h in enumerate(header) if i != li]
    return Dataset(np.asarray(rows, dtype=float), y, num_classes, names)


def write_csv(ds: Dataset, path, label_column: str = "label") -> None:
    """Write ``ds`` with the label as the last column, 17 significant digits."""
    names = ds.feature_names or [f"f{i}" for i in range(ds.d)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, label_column])
        for x, lab in zip(ds.features, ds.labels):
            w.writerow([*(f"{v:.17g}" for v in x), int(lab)])


def fit_scaler(X: np.ndarray) -> ScalerParams:
    X = np.asarray(X, dtype=float)
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # constant columns map to zero
    stds = np.where(stds > 0, stds, 1.0)
    return ScalerParams(means, stds)


def fit_standardize(ds: Dataset) -> tuple[Dataset, ScalerParams]:
    sc = fit_scaler(ds.features)
    return apply_scaler(ds, sc), sc


def apply_scaler(ds: Dataset, sc: ScalerParams) -> Dataset:
    return ds.with_features(sc.transform(ds.features))


def split(ds: Dataset, fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0.0 < fraction < 1.0:
        raise DataError(f"fraction must be in (0, 1), got {fraction}")
    n_first = int(np.floor(fraction * ds.n))
    if n_first == 0 or n_first == ds.n:
        raise DataError(f"fraction {fraction} on n={ds.n} yields an empty part")
    perm = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(np.sort(perm[:n_first])), ds.subset(np.sort(perm[n_first:]))
