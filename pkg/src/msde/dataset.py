"""Tabular data container, CSV ingestion and z-score standardization."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when input data cannot be parsed or violates a precondition."""


@dataclass(frozen=True)
class Dataset:
    """Row-major ``N x d`` matrix of finite reals with optional binary labels.

    Instances are treated as immutable: ``values`` is made read-only on
    construction so a dataset can be shared freely between workers.
    """

    values: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {values.shape}")
        n, d = values.shape
        if n < 1 or d < 1:
            raise DataError(f"need N >= 1 and d >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {r}, column {c}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        names = list(self.feature_names) or [f"x{j}" for j in range(d)]
        if len(names) != d:
            raise DataError(f"{len(names)} feature names for {d} columns")
        object.__setattr__(self, "feature_names", names)

        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64, copy=True).ravel()
            if labels.shape[0] != n:
                raise DataError(f"{labels.shape[0]} labels for {n} rows")
            if not np.all((labels == 0) | (labels == 1)):
                raise DataError("labels must be 0 or 1")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray, feature_names: Sequence[str] | None = None) -> "Dataset":
        return Dataset(
            values,
            list(feature_names) if feature_names is not None else self.feature_names,
            self.labels,
        )


def _parse_cell(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"non-numeric cell {text!r} at row {row}, column {col!r}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite cell {text!r} at row {row}, column {col!r}")
    return value


def load_csv(path: str | Path, label_column: str | None = None) -> Dataset:
    """Read a comma-separated file with a header row.

    Row numbers in error messages are 1-based data rows (the header is
    row 0).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None

        if label_column is not None and label_column not in header:
            raise DataError(f"label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column) if label_column is not None else -1
        feature_cols = [j for j in range(len(header)) if j != label_idx]

        rows, labels = [], []
        for lineno, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(
                    f"ragged row {lineno}: {len(record)} cells, header has {len(header)}"
                )
            rows.append([_parse_cell(record[j], lineno, header[j]) for j in feature_cols])
            if label_idx >= 0:
                y = _parse_cell(record[label_idx], lineno, header[label_idx])
                if y not in (0.0, 1.0):
                    raise DataError(f"label {record[label_idx]!r} at row {lineno} is not 0/1")
                labels.append(int(y))

    if not rows:
        raise DataError(f"{path} has no data rows")
    return Dataset(
        np.array(rows, dtype=np.float64),
        [header[j] for j in feature_cols],
        np.array(labels) if label_idx >= 0 else None,
    )


def write_csv(data: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Write ``data`` with 12 significant digits; labels go in the last column."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(data.feature_names)
        if data.labels is not None:
            header.append(label_column)
        writer.writerow(header)
        for i, row in enumerate(data.values):
            cells = [f"{v:.12g}" for v in row]
            if data.labels is not None:
                cells.append(str(int(data.labels[i])))
            writer.writerow(cells)


def standardize(data: Dataset) -> Dataset:
    """Z-score each feature (population std); constant features become zeros."""
    if data.n_samples < 2:
        raise DataError("standardize needs at least 2 rows")
    x = data.values
    mean = x.mean(axis=0)
    centered = x - mean
    std = np.sqrt(np.mean(centered**2, axis=0))
    # relative threshold so that float noise on a constant column is not amplified
    scale = np.maximum(np.abs(mean), 1.0)
    constant = std <= 1e-12 * scale
    std = np.where(constant, 1.0, std)
    z = centered / std
    z[:, constant] = 0.0
    return data.with_values(z)


def seed_sequence(seed: int, *tags) -> np.random.SeedSequence:
    """Child seed stream for ``seed`` keyed by integer or string ``tags``.

    Streams for different tag tuples are independent, and identical tags
    always give the same stream, so workers never share a generator.
    """
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for tag in tags:
        if isinstance(tag, str):
            words.extend(tag.encode("utf-8"))
            words.append(0x100)
        elif isinstance(tag, float):
            words.append(int(round(tag * 1_000_000)))
        else:
            words.append(int(tag))
    return np.random.SeedSequence(words)


def make_rng(seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *tags))
