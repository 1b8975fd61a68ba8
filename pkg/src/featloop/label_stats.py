"""Label co-occurrence and conditional-probability statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabelMatrix


@dataclass(frozen=True)
class CooccurrenceStats:
    label_names: tuple[str, ...]
    c: np.ndarray          # L x L joint probabilities
    p_cond: np.ndarray     # L x L, p_cond[i, j] = P(j | i); rows with no support are garbage
    support: np.ndarray    # per-label positive counts
    defined: np.ndarray    # bool per label: support > 0, i.e. p_cond row is meaningful

    @property
    def num_labels(self):
        return len(self.label_names)


def cooccurrence(labels: LabelMatrix) -> CooccurrenceStats:
    """C[i,j] = fraction of instances where labels i and j are both active;
    P(j|i) = C[i,j] * n / count(i active), undefined when label i never fires."""
    y = labels.y.astype(np.int64)
    n = labels.n
    counts = y.T @ y                       # integer pairwise co-activation counts
    c = counts / n                         # single division keeps symmetry exact
    support = np.diag(counts).copy()
    defined = support > 0
    p_cond = np.zeros_like(c)
    for i in range(labels.num_labels):
        if defined[i]:
            p_cond[i] = counts[i] / support[i]
            p_cond[i, i] = 1.0
    return CooccurrenceStats(labels.label_names, c, p_cond, support, defined)


def top_pairs(stats: CooccurrenceStats, m: int = 15):
    """Strongest co-occurring off-diagonal pairs, C descending, ties by (i, j).

    Returns tuples (i, j, C[i,j], P(j|i), P(i|j)); conditional entries are
    None when the conditioning label has no support. Zero joints are skipped.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    pairs = []
    L = stats.num_labels
    for i in range(L):
        for j in range(i + 1, L):
            cij = stats.c[i, j]
            if cij == 0:
                continue
            pji = float(stats.p_cond[i, j]) if stats.defined[i] else None
            pij = float(stats.p_cond[j, i]) if stats.defined[j] else None
            pairs.append((i, j, float(cij), pji, pij))
    pairs.sort(key=lambda t: (-t[2], t[0], t[1]))
    return pairs[:m]
