"""Dataset construction: synthetic generators, CSV loading, imbalanced-pool
construction, and labeled/unlabeled pool bookkeeping."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import Matrix, RngStream, as_matrix


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n x d), integer labels in [0, num_classes), class count."""

    features: Matrix
    labels: tuple[int, ...]
    num_classes: int

    def __post_init__(self):
        features = as_matrix(self.features, "dataset features")
        labels = tuple(int(y) for y in self.labels)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if len(labels) != features.shape[0]:
            raise ValueError(
                f"label count {len(labels)} does not match row count {features.shape[0]}"
            )
        bad = [y for y in labels if not 0 <= y < self.num_classes]
        if bad:
            raise ValueError(f"labels outside [0, {self.num_classes}): {sorted(set(bad))}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PoolState:
    """Disjoint ordered index sets for the labeled and unlabeled pools.

    Disjointness and non-negativity are asserted on every construction, so any
    mutation path (there is exactly one: a fresh PoolState) revalidates them.
    """

    labeled: tuple[int, ...]
    unlabeled: tuple[int, ...]

    def __post_init__(self):
        labeled = tuple(int(i) for i in self.labeled)
        unlabeled = tuple(int(i) for i in self.unlabeled)
        object.__setattr__(self, "labeled", labeled)
        object.__setattr__(self, "unlabeled", unlabeled)
        lset, uset = set(labeled), set(unlabeled)
        if len(lset) != len(labeled) or len(uset) != len(unlabeled):
            raise ValueError("pool index sets must be duplicate-free")
        overlap = lset & uset
        if overlap:
            raise ValueError(f"labeled and unlabeled pools overlap: {sorted(overlap)[:5]}")
        if any(i < 0 for i in labeled + unlabeled):
            raise ValueError("pool indices must be non-negative")

    @property
    def total(self) -> int:
        return len(self.labeled) + len(self.unlabeled)


def one_hot(labels, num_classes: int) -> Matrix:
    """One-hot encode integer labels into an (n x num_classes) matrix."""
    labels = [int(y) for y in labels]
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    if any(not 0 <= y < num_classes for y in labels):
        raise ValueError(f"labels outside [0, {num_classes})")
    out = np.zeros((len(labels), num_classes), dtype=np.float64)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _blob_means(num_classes: int, dim: int) -> np.ndarray:
    # class means on a circle (first two dims), spaced widely enough that
    # adjacent classes stay separable at unit spread
    radius = max(3.0, 0.75 * num_classes)
    means = np.zeros((num_classes, dim), dtype=np.float64)
    if dim == 1:
        means[:, 0] = radius * np.arange(num_classes)
    else:
        ang = 2.0 * np.pi * np.arange(num_classes) / num_classes
        means[:, 0] = radius * np.cos(ang)
        means[:, 1] = radius * np.sin(ang)
    return means


def gen_blobs(
    n_per_class: int, num_classes: int, dim: int, spread: float, rng: RngStream
) -> Dataset:
    """Gaussian clusters with one distinct mean per class, std = spread."""
    if n_per_class < 1 or num_classes < 2 or dim < 1:
        raise ValueError(
            f"counts must be positive (n_per_class={n_per_class}, "
            f"num_classes={num_classes}, dim={dim})"
        )
    if not spread > 0.0:
        raise ValueError(f"spread must be positive, got {spread}")
    means = _blob_means(num_classes, dim)
    rows = []
    labels: list[int] = []
    for c in range(num_classes):
        noise = rng.gen.standard_normal((n_per_class, dim))
        rows.append(means[c] + spread * noise)
        labels.extend([c] * n_per_class)
    return Dataset(np.vstack(rows), tuple(labels), num_classes)


def gen_two_moons(n: int, noise: float, rng: RngStream) -> Dataset:
    """Two interleaved unit half-circles with Gaussian jitter, binary labels.

    Class 0 is the upper half-circle centered at the origin, class 1 the lower
    half-circle centered at (1, 0.5). Class counts are balanced within 1.
    """
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if noise < 0.0:
        raise ValueError(f"noise must be non-negative, got {noise}")
    n_inner = n // 2
    n_outer = n - n_inner
    t_outer = np.linspace(0.0, np.pi, n_outer)
    t_inner = np.linspace(0.0, np.pi, n_inner)
    outer = np.column_stack([np.cos(t_outer), np.sin(t_outer)])
    inner = np.column_stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)])
    points = np.vstack([outer, inner])
    if noise > 0.0:
        points = points + noise * rng.gen.standard_normal(points.shape)
    labels = (0,) * n_outer + (1,) * n_inner
    return Dataset(points, labels, 2)


def _parses_as_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_csv(path, label_column: int | str, num_classes: int) -> Dataset:
    """Load a delimited dataset: real feature columns plus one integer label column.

    An optional header row is auto-detected (any non-numeric cell in the first
    row). label_column is a 0-based column index (negative allowed) or, when a
    header is present, a column name. Row order is preserved.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        raw = [(reader.line_num, row) for row in reader if row]
    if not raw:
        raise ValueError(f"{path}: no data rows")

    header: list[str] | None = None
    first_line, first_row = raw[0]
    if isinstance(label_column, str) or not all(_parses_as_float(c) for c in first_row):
        header = [c.strip() for c in first_row]
        raw = raw[1:]
        if not raw:
            raise ValueError(f"{path}: header only, no data rows")

    arity = len(raw[0][1])
    if isinstance(label_column, str):
        if header is None or label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)
        if label_idx < 0:
            label_idx += arity
    if not 0 <= label_idx < arity:
        raise ValueError(f"{path}: label column {label_column} out of range for {arity} columns")

    features = []
    labels = []
    for line_num, row in raw:
        if len(row) != arity:
            raise ValueError(
                f"{path}: line {line_num}: expected {arity} columns, got {len(row)}"
            )
        feat_row = []
        for j, cell in enumerate(row):
            cell = cell.strip()
            if j == label_idx:
                try:
                    label = int(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: line {line_num}: label {cell!r} is not an integer"
                    ) from None
                if not 0 <= label < num_classes:
                    raise ValueError(
                        f"{path}: line {line_num}: label {label} outside [0, {num_classes})"
                    )
                labels.append(label)
            else:
                try:
                    feat_row.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: line {line_num}: feature column {j} value {cell!r} "
                        "is not a real number"
                    ) from None
        features.append(feat_row)
    return Dataset(np.asarray(features, dtype=np.float64), tuple(labels), num_classes)


def save_csv(dataset: Dataset, path, header: bool = True) -> None:
    """Write a dataset as CSV (features then a final `label` column).

    Floats are written with repr precision so a load round-trips exactly.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow([f"feature_{j}" for j in range(dataset.dim)] + ["label"])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(v)) for v in dataset.features[i]] + [dataset.labels[i]]
            )


def make_imbalanced(
    dataset: Dataset, minority_classes, ratio: int, rng: RngStream
) -> Dataset:
    """Subsample each minority class to floor(count / ratio) rows, chosen uniformly.

    Majority classes and all retained feature rows are untouched; original row
    order is preserved.
    """
    minority = {int(c) for c in minority_classes}
    ratio = int(ratio)
    if ratio < 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    bad = [c for c in minority if not 0 <= c < dataset.num_classes]
    if bad:
        raise ValueError(f"minority classes outside [0, {dataset.num_classes}): {sorted(bad)}")

    keep = np.ones(dataset.n, dtype=bool)
    for c in sorted(minority):
        class_rows = [i for i, y in enumerate(dataset.labels) if y == c]
        kept = len(class_rows) // ratio
        if kept < 1:
            raise ValueError(
                f"class {c} has {len(class_rows)} samples, fewer than ratio {ratio}; "
                "subsampling would empty it"
            )
        chosen = rng.gen.choice(len(class_rows), size=kept, replace=False)
        keep[class_rows] = False
        keep[[class_rows[int(k)] for k in chosen]] = True
    idx = np.flatnonzero(keep)
    return Dataset(
        dataset.features[idx],
        tuple(dataset.labels[int(i)] for i in idx),
        dataset.num_classes,
    )


def init_pool(dataset: Dataset, initial_budget: int, rng: RngStream) -> PoolState:
    """Label a uniformly random subset of initial_budget indices; rest unlabeled."""
    initial_budget = int(initial_budget)
    if not 0 < initial_budget <= dataset.n:
        raise ValueError(
            f"initial budget must be in [1, {dataset.n}], got {initial_budget}"
        )
    perm = rng.gen.permutation(dataset.n)
    return PoolState(
        tuple(int(i) for i in perm[:initial_budget]),
        tuple(int(i) for i in perm[initial_budget:]),
    )
