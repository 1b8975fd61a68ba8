"""Tabular ingestion: typed columns, binary label matrix, seeded folds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

MISSING_CATEGORY = "__missing__"

TRUE_TOKENS = {"1", "true", "yes"}
FALSE_TOKENS = {"0", "false", "no"}


class DatasetError(Exception):
    pass


class MissingLabelColumn(DatasetError):
    pass


class UnparseableLabelValue(DatasetError):
    def __init__(self, row: int, column: str, token: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {token!r} as a binary label")
        self.row = row
        self.column = column


class EmptyDataset(DatasetError):
    pass


class DuplicateColumnName(DatasetError):
    pass


class BadFoldCount(DatasetError):
    pass


class LengthMismatch(DatasetError):
    pass


class NonFiniteExtra(DatasetError):
    pass


class ColumnKind(Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind
    # numeric: float array; categorical: tuple of tokens (missing already replaced)
    values: tuple

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class LabelMatrix:
    label_names: tuple[str, ...]
    y: np.ndarray  # n x L, dtype int8, entries in {0,1}

    def __post_init__(self):
        if self.y.ndim != 2 or self.y.shape[1] != len(self.label_names):
            raise DatasetError("label matrix shape does not match label names")
        if len(self.label_names) < 2:
            raise DatasetError("multi-label task requires at least 2 labels")

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def num_labels(self):
        return self.y.shape[1]


@dataclass(frozen=True)
class Dataset:
    name: str
    columns: tuple[Column, ...]
    labels: LabelMatrix
    # ingestion metadata carried for profiling: pre-imputation missing counts
    # and the first raw rows of the file (including label columns)
    raw_missing_counts: dict = field(default_factory=dict)
    sample_header: tuple[str, ...] = ()
    sample_rows: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        if not self.columns:
            raise EmptyDataset("dataset has no feature columns")
        n = self.labels.n
        if n < 1:
            raise EmptyDataset("dataset has no rows")
        for col in self.columns:
            if len(col) != n:
                raise DatasetError(f"column {col.name!r} length {len(col)} != {n}")
            if col.name in self.labels.label_names:
                raise DatasetError(f"feature column {col.name!r} collides with a label name")

    @property
    def n(self):
        return self.labels.n

    @property
    def feature_names(self):
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def subset(self, rows) -> "Dataset":
        """Row-subset view (used for holdout splits); ingestion metadata is kept."""
        rows = np.asarray(rows, dtype=int)
        cols = []
        for c in self.columns:
            if c.kind is ColumnKind.NUMERIC:
                vals = tuple(np.asarray(c.values, dtype=float)[rows].tolist())
            else:
                vals = tuple(c.values[i] for i in rows)
            cols.append(Column(c.name, c.kind, vals))
        labels = LabelMatrix(self.labels.label_names, self.labels.y[rows])
        return Dataset(self.name, tuple(cols), labels,
                       self.raw_missing_counts, self.sample_header, self.sample_rows)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]
    seed: int

    def fold_indices(self, fold: int):
        return np.flatnonzero(np.asarray(self.assignments) == fold)

    def fingerprint(self) -> str:
        return f"k={self.k};seed={self.seed};a={','.join(map(str, self.assignments))}"


@dataclass(frozen=True)
class IngestOptions:
    delimiter: str = ","
    na_token: str = ""


def _parse_label_token(token: str, row: int, column: str) -> int:
    t = token.strip().lower()
    if t in TRUE_TOKENS:
        return 1
    if t in FALSE_TOKENS:
        return 0
    raise UnparseableLabelValue(row, column, token)


def _is_numeric_token(token: str) -> bool:
    try:
        return math.isfinite(float(token))
    except ValueError:
        return False


def ingest_csv(path, label_names, options: IngestOptions | None = None,
               name: str | None = None) -> Dataset:
    """Read a delimited file, split out the label matrix and type the features.

    A column is Numeric iff every non-missing token parses as a finite number.
    Numeric missing values are imputed with the column median; categorical
    missing values get the reserved "__missing__" token.
    """
    options = options or IngestOptions()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=options.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: empty file")
        rows = [row for row in reader if row]

    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DuplicateColumnName(f"duplicate column headers: {dupes}")
    for lbl in label_names:
        if lbl not in header:
            raise MissingLabelColumn(f"label column {lbl!r} not found in header")
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DatasetError(f"row {i}: expected {len(header)} fields, got {len(row)}")

    n = len(rows)
    label_set = set(label_names)
    feature_headers = [h for h in header if h not in label_set]
    if not feature_headers:
        raise EmptyDataset("no feature columns remain after removing labels")
    col_idx = {h: j for j, h in enumerate(header)}

    y = np.zeros((n, len(label_names)), dtype=np.int8)
    for j, lbl in enumerate(label_names):
        cj = col_idx[lbl]
        for i, row in enumerate(rows):
            y[i, j] = _parse_label_token(row[cj], i, lbl)

    columns = []
    missing_counts = {}
    for h in feature_headers:
        cj = col_idx[h]
        tokens = [row[cj] for row in rows]
        missing = [t == options.na_token for t in tokens]
        missing_counts[h] = sum(missing)
        present = [t for t, m in zip(tokens, missing) if not m]
        numeric = bool(present) and all(_is_numeric_token(t) for t in present)
        if numeric:
            vals = np.array([float(t) if not m else np.nan for t, m in zip(tokens, missing)])
            if np.isnan(vals).any():
                median = float(np.median(vals[~np.isnan(vals)]))
                vals = np.where(np.isnan(vals), median, vals)
            columns.append(Column(h, ColumnKind.NUMERIC, tuple(vals.tolist())))
        else:
            vals = tuple(MISSING_CATEGORY if m else t for t, m in zip(tokens, missing))
            columns.append(Column(h, ColumnKind.CATEGORICAL, vals))

    sample = tuple(tuple(row) for row in rows[:10])
    ds_name = name if name is not None else str(path)
    return Dataset(ds_name, tuple(columns), LabelMatrix(tuple(label_names), y),
                   missing_counts, tuple(header), sample)


def make_folds(ds: Dataset, k: int, seed: int) -> FoldPlan:
    """Seeded shuffle of row indices dealt round-robin into k folds."""
    return make_folds_n(ds.n, k, seed)


def make_folds_n(n: int, k: int, seed: int) -> FoldPlan:
    if not (2 <= k <= n):
        raise BadFoldCount(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    perm = rng.permutation(n)
    assignments = np.empty(n, dtype=int)
    assignments[perm] = np.arange(n) % k
    return FoldPlan(k, tuple(int(a) for a in assignments), seed)


def categorical_codes(col: Column) -> np.ndarray:
    """Integer codes by first-appearance order."""
    mapping = {}
    codes = np.empty(len(col.values), dtype=float)
    for i, tok in enumerate(col.values):
        if tok not in mapping:
            mapping[tok] = len(mapping)
        codes[i] = mapping[tok]
    return codes


def encode_matrix(ds: Dataset, extra=()) -> np.ndarray:
    """Numeric model matrix: numeric columns as-is, categoricals coded by
    first appearance, extra feature vectors appended on the right."""
    n = ds.n
    cols = []
    for c in ds.columns:
        if c.kind is ColumnKind.NUMERIC:
            cols.append(np.asarray(c.values, dtype=float))
        else:
            cols.append(categorical_codes(c))
    for v in extra:
        v = np.asarray(v, dtype=float)
        if v.shape != (n,):
            raise LengthMismatch(f"extra vector has shape {v.shape}, expected ({n},)")
        if not np.isfinite(v).all():
            raise NonFiniteExtra("extra vector contains non-finite entries")
        cols.append(v)
    return np.column_stack(cols)
