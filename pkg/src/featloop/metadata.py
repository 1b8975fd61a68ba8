"""Dataset profiling: the structured summary that feeds prompt construction."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .dataset import ColumnKind, Dataset

MAX_CATEGORIES = 10


@dataclass(frozen=True)
class NumericStats:
    minimum: float
    maximum: float
    mean: float
    std: float


@dataclass(frozen=True)
class ColumnProfile:
    name: str
    kind: ColumnKind
    missing_rate: float
    numeric_stats: NumericStats | None = None
    # (token, frequency fraction) pairs, most frequent first, at most 10
    top_categories: tuple = ()
    extra_category_count: int = 0


@dataclass(frozen=True)
class DatasetProfile:
    task_description: str
    column_profiles: tuple[ColumnProfile, ...]
    label_names: tuple[str, ...]
    label_prevalence: tuple[float, ...]
    sample_header: tuple[str, ...]
    sample_rows: tuple[tuple[str, ...], ...]

    def numeric_columns(self):
        """(name, mean) pairs for numeric columns, in dataset order."""
        return tuple((p.name, p.numeric_stats.mean) for p in self.column_profiles
                     if p.kind is ColumnKind.NUMERIC)


def profile(ds: Dataset, raw_missing_counts: dict | None = None,
            task_description: str = "") -> DatasetProfile:
    """Deterministic per-column stats plus label prevalence and sample rows.

    missing_rate reflects the pre-imputation file; numeric stats and category
    frequencies are computed over the imputed values ("__missing__" shows up
    as its own category).
    """
    if raw_missing_counts is None:
        raw_missing_counts = ds.raw_missing_counts
    n = ds.n
    profiles = []
    for col in ds.columns:
        missing_rate = raw_missing_counts.get(col.name, 0) / n
        if col.kind is ColumnKind.NUMERIC:
            vals = np.asarray(col.values, dtype=float)
            stats = NumericStats(float(vals.min()), float(vals.max()),
                                 float(vals.mean()), float(vals.std()))
            profiles.append(ColumnProfile(col.name, col.kind, missing_rate, stats))
        else:
            counts = Counter(col.values)
            # most frequent first; ties broken by first appearance in the column
            first_seen = {}
            for tok in col.values:
                first_seen.setdefault(tok, len(first_seen))
            ordered = sorted(counts.items(), key=lambda kv: (-kv[1], first_seen[kv[0]]))
            top = tuple((tok, cnt / n) for tok, cnt in ordered[:MAX_CATEGORIES])
            extra = max(0, len(ordered) - MAX_CATEGORIES)
            profiles.append(ColumnProfile(col.name, col.kind, missing_rate,
                                          top_categories=top, extra_category_count=extra))
    prevalence = tuple(float(v) for v in ds.labels.y.mean(axis=0))
    return DatasetProfile(task_description, tuple(profiles), ds.labels.label_names,
                          prevalence, ds.sample_header, ds.sample_rows)


def render_report(prof: DatasetProfile, stats=None) -> str:
    """Human-readable profile, also used by the `inspect` subcommand."""
    lines = []
    if prof.task_description:
        lines.append(f"Task: {prof.task_description}")
    lines.append(f"Columns ({len(prof.column_profiles)}):")
    for p in prof.column_profiles:
        if p.kind is ColumnKind.NUMERIC:
            s = p.numeric_stats
            lines.append(f"  {p.name}: numeric, missing {p.missing_rate:.3f}, "
                         f"min {s.minimum:.3f}, max {s.maximum:.3f}, "
                         f"mean {s.mean:.3f}, std {s.std:.3f}")
        else:
            cats = ", ".join(f"{tok} ({frac:.3f})" for tok, frac in p.top_categories)
            if p.extra_category_count:
                cats += f", ... and {p.extra_category_count} more"
            lines.append(f"  {p.name}: categorical, missing {p.missing_rate:.3f}, "
                         f"values {cats}")
    lines.append(f"Labels ({len(prof.label_names)}):")
    for name, prev in zip(prof.label_names, prof.label_prevalence):
        lines.append(f"  {name}: prevalence {prev:.3f}")
    if stats is not None:
        lines.append("Label co-occurrence (joint probability):")
        L = stats.num_labels
        header = "        " + " ".join(f"{nm[:8]:>8}" for nm in stats.label_names)
        lines.append(header)
        for i in range(L):
            row = " ".join(f"{stats.c[i, j]:8.3f}" for j in range(L))
            lines.append(f"  {stats.label_names[i][:6]:>6} {row}")
    return "\n".join(lines)


def profile_to_dict(prof: DatasetProfile) -> dict:
    cols = []
    for p in prof.column_profiles:
        entry = {"name": p.name, "kind": p.kind.value, "missing_rate": p.missing_rate}
        if p.numeric_stats is not None:
            s = p.numeric_stats
            entry["stats"] = {"min": s.minimum, "max": s.maximum,
                              "mean": s.mean, "std": s.std}
        if p.top_categories:
            entry["top_categories"] = [[tok, frac] for tok, frac in p.top_categories]
            entry["extra_category_count"] = p.extra_category_count
        cols.append(entry)
    return {
        "task_description": prof.task_description,
        "columns": cols,
        "labels": [{"name": nm, "prevalence": pv}
                   for nm, pv in zip(prof.label_names, prof.label_prevalence)],
        "sample_header": list(prof.sample_header),
        "sample_rows": [list(r) for r in prof.sample_rows],
    }
