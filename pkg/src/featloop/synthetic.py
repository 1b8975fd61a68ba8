"""Seeded synthetic dataset used by the offline end-to-end tests.

Two labels driven by a ratio of the first two columns: axis-aligned trees on
the raw features underfit the curved decision boundary, so the ratio feature
produced by the generation loop yields a measurable metric gain.
"""

from __future__ import annotations

import csv

import numpy as np

from .dataset import Column, ColumnKind, Dataset, LabelMatrix


def make_ratio_dataset(n: int = 600, seed: int = 7, noise_rate: float = 0.05) -> Dataset:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    x1 = rng.uniform(0.0, 10.0, n)
    x2 = rng.uniform(0.0, 10.0, n)
    x3 = rng.uniform(0.0, 1.0, n)
    x4 = rng.uniform(-5.0, 5.0, n)
    x5 = rng.uniform(0.0, 100.0, n)

    ratio = x1 / (x2 + 1.0)
    y1 = (ratio > np.median(ratio)).astype(np.int8)
    y2 = (y1 ^ (x3 > np.median(x3)).astype(np.int8)).astype(np.int8)
    flips = rng.random(n) < noise_rate
    y2 = np.where(flips, 1 - y2, y2).astype(np.int8)

    columns = tuple(
        Column(name, ColumnKind.NUMERIC, tuple(vals.tolist()))
        for name, vals in (("x1", x1), ("x2", x2), ("x3", x3), ("x4", x4), ("x5", x5))
    )
    labels = LabelMatrix(("y1", "y2"), np.column_stack([y1, y2]))
    header = ("x1", "x2", "x3", "x4", "x5", "y1", "y2")
    sample = tuple(
        tuple(f"{v:.6f}" for v in (x1[i], x2[i], x3[i], x4[i], x5[i])) +
        (str(int(y1[i])), str(int(y2[i])))
        for i in range(min(10, n))
    )
    return Dataset("synthetic_ratio", columns, labels,
                   raw_missing_counts={}, sample_header=header, sample_rows=sample)


def write_ratio_csv(path, n: int = 600, seed: int = 7) -> None:
    """Materialize the synthetic dataset for CLI use."""
    ds = make_ratio_dataset(n, seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + list(ds.labels.label_names))
        for i in range(ds.n):
            row = [repr(float(c.values[i])) for c in ds.columns]
            row += [str(int(v)) for v in ds.labels.y[i]]
            writer.writerow(row)
