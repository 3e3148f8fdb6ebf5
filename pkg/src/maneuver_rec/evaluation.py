"""Class-wise evaluation: confusion counts and their two normalizations.

The confusion matrix has actual classes as rows and predicted classes
as columns.  Row-normalizing yields the recall matrix (diagonal =
per-class recall); column-normalizing yields the precision matrix
(diagonal = per-class precision).  Rows or columns with zero support
stay all-zero and are marked "no support" downstream instead of being
reported as a measured 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Raw counts: counts[i, j] = samples of actual class i predicted as j."""

    counts: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.labels)
        if counts.shape != (k, k):
            raise DataError(f"counts shape {counts.shape} does not match {k} labels")
        if (counts < 0).any():
            raise DataError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class PerClassStats:
    label: str
    precision: float
    recall: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts plus both normalizations and a per-class summary."""

    confusion: ConfusionMatrix
    recall_matrix: np.ndarray
    precision_matrix: np.ndarray
    per_class: tuple[PerClassStats, ...]


def confusion_matrix(
    actual: Sequence[int],
    predicted: Sequence[int],
    k: int,
    labels: Sequence[str] | None = None,
) -> ConfusionMatrix:
    """Count (actual, predicted) pairs into a k-by-k matrix.

    labels defaults to the stringified codes; when given it must have
    length k.
    """
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.ndim != 1 or predicted.ndim != 1 or actual.shape != predicted.shape:
        raise DataError("actual and predicted must be equal-length 1-d code sequences")
    if k < 1:
        raise DataError(f"class count must be >= 1, got {k}")
    if labels is None:
        labels = tuple(str(i) for i in range(k))
    elif len(labels) != k:
        raise DataError(f"got {len(labels)} labels for {k} classes")
    counts = np.zeros((k, k), dtype=np.int64)
    if actual.size:
        if actual.min() < 0 or actual.max() >= k or predicted.min() < 0 or predicted.max() >= k:
            raise DataError(f"class codes must lie in [0, {k})")
        np.add.at(counts, (actual, predicted), 1)
    return ConfusionMatrix(counts, tuple(labels))


def recall_matrix(cm: ConfusionMatrix) -> np.ndarray:
    """Row-normalized counts; zero-support rows stay all-zero."""
    counts = cm.counts.astype(np.float64)
    row_sums = counts.sum(axis=1, keepdims=True)
    safe = np.where(row_sums > 0, row_sums, 1.0)
    return np.where(row_sums > 0, counts / safe, 0.0)


def precision_matrix(cm: ConfusionMatrix) -> np.ndarray:
    """Column-normalized counts; never-predicted columns stay all-zero."""
    counts = cm.counts.astype(np.float64)
    col_sums = counts.sum(axis=0, keepdims=True)
    safe = np.where(col_sums > 0, col_sums, 1.0)
    return np.where(col_sums > 0, counts / safe, 0.0)


def per_class_stats(cm: ConfusionMatrix) -> tuple[PerClassStats, ...]:
    """Per-class precision, recall, and support (actual count).

    Undefined ratios (zero support or never predicted) are reported as
    0.0; support distinguishes them from measured zeros.
    """
    counts = cm.counts
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    stats = []
    for i, label in enumerate(cm.labels):
        diag = int(counts[i, i])
        recall = diag / int(row_sums[i]) if row_sums[i] > 0 else 0.0
        precision = diag / int(col_sums[i]) if col_sums[i] > 0 else 0.0
        stats.append(PerClassStats(label, float(precision), float(recall), int(row_sums[i])))
    return tuple(stats)


def evaluation_report(
    actual: Sequence[int],
    predicted: Sequence[int],
    labels: Sequence[str],
) -> EvalReport:
    """Full report for decoded-or-coded predictions against truth."""
    cm = confusion_matrix(actual, predicted, len(labels), labels)
    return EvalReport(cm, recall_matrix(cm), precision_matrix(cm), per_class_stats(cm))


def write_matrix_csv(path, matrix: np.ndarray, labels: Sequence[str]) -> None:
    """Matrix as CSV with label header row and label row prefixes.

    Integer matrices keep integer cells; real matrices use repr() so
    reading the file back reproduces the exact values.
    """
    matrix = np.asarray(matrix)
    k = len(labels)
    if matrix.shape != (k, k):
        raise DataError(f"matrix shape {matrix.shape} does not match {k} labels")
    is_int = np.issubdtype(matrix.dtype, np.integer)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + [str(l) for l in labels])
        for i, label in enumerate(labels):
            row = [str(int(v)) if is_int else repr(float(v)) for v in matrix[i]]
            writer.writerow([str(label)] + row)


def read_matrix_csv(path) -> tuple[np.ndarray, tuple[str, ...]]:
    """Inverse of write_matrix_csv; always returns float64 values."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != [""]:
        raise DataError(f"{path}: expected a labeled matrix header")
    labels = tuple(rows[0][1:])
    k = len(labels)
    if len(rows) != k + 1:
        raise DataError(f"{path}: expected {k} matrix rows, found {len(rows) - 1}")
    values = np.empty((k, k), dtype=np.float64)
    for i, row in enumerate(rows[1:]):
        if len(row) != k + 1 or row[0] != labels[i]:
            raise DataError(f"{path}: malformed matrix row {i + 1}")
        values[i] = [float(v) for v in row[1:]]
    return values, labels


def write_per_class_csv(path, per_class: Sequence[PerClassStats]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "precision", "recall", "support"])
        for s in per_class:
            writer.writerow([s.label, repr(s.precision), repr(s.recall), s.support])
