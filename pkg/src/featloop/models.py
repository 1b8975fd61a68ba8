"""Lightweight multi-label classifiers and evaluation metrics.

Binary-relevance random forest (Gini splits, seeded bootstraps, midpoint
thresholds) and ML-kNN with Laplace-smoothed posteriors.  Both are fully
deterministic for a fixed seed, which the evaluation loop relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ShapeMismatch(Exception):
    pass


class KTooLarge(Exception):
    pass


@dataclass(frozen=True)
class ForestConfig:
    trees: int = 50
    max_depth: int = 8
    min_leaf: int = 2
    seed: int = 0


@dataclass(frozen=True)
class MlknnConfig:
    k: int = 10
    smoothing: float = 1.0


@dataclass(frozen=True)
class MetricTriple:
    accuracy: float      # example-based Jaccard accuracy
    hamming_loss: float
    micro_f1: float

    def as_tuple(self):
        return (self.accuracy, self.hamming_loss, self.micro_f1)


# ------------------------------------------------------------ decision trees

@dataclass
class _TreeNode:
    leaf: int = -1              # predicted class when >= 0
    feature: int = -1
    threshold: float = 0.0
    left: "_TreeNode | None" = None
    right: "_TreeNode | None" = None


def _gini(pos, total):
    if total == 0:
        return 0.0
    p = pos / total
    return 2.0 * p * (1.0 - p)


def _best_split(X, y, features, min_leaf):
    """Scan midpoint thresholds of each candidate feature; returns
    (feature, threshold, weighted_impurity) or None when no split improves."""
    n = len(y)
    parent = _gini(int(y.sum()), n)
    best = None
    for f in features:
        vals = X[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y[order]
        # split after position i puts i+1 rows left; only at value boundaries
        boundaries = np.flatnonzero(sv[:-1] != sv[1:])
        if boundaries.size == 0:
            continue
        left_n = boundaries + 1
        right_n = n - left_n
        ok = (left_n >= min_leaf) & (right_n >= min_leaf)
        if not ok.any():
            continue
        cum_pos = np.cumsum(sy)
        left_pos = cum_pos[boundaries]
        total_pos = cum_pos[-1]
        right_pos = total_pos - left_pos
        pl = left_pos / left_n
        pr = right_pos / right_n
        weighted = (left_n * 2.0 * pl * (1.0 - pl) + right_n * 2.0 * pr * (1.0 - pr)) / n
        weighted = np.where(ok, weighted, np.inf)
        i = int(np.argmin(weighted))
        if weighted[i] < parent - 1e-12:
            thr = (sv[boundaries[i]] + sv[boundaries[i] + 1]) / 2.0
            if best is None or weighted[i] < best[2] - 1e-15:
                best = (int(f), float(thr), float(weighted[i]))
    return best


def _grow(X, y, rng, cfg: ForestConfig, depth: int, pool) -> _TreeNode:
    n = len(y)
    pos = int(y.sum())
    # tie -> predict 1
    if depth >= cfg.max_depth or n < 2 * cfg.min_leaf or pos == 0 or pos == n \
            or pool.size == 0:
        return _TreeNode(leaf=int(pos * 2 >= n))
    m = min(math.ceil(math.sqrt(pool.size)), pool.size)
    features = np.sort(rng.choice(pool, size=m, replace=False))
    split = _best_split(X, y, features, cfg.min_leaf)
    if split is None:
        return _TreeNode(leaf=int(pos * 2 >= n))
    f, thr, _ = split
    mask = X[:, f] <= thr
    node = _TreeNode(feature=f, threshold=thr)
    node.left = _grow(X[mask], y[mask], rng, cfg, depth + 1, pool)
    node.right = _grow(X[~mask], y[~mask], rng, cfg, depth + 1, pool)
    return node


def _tree_predict(node: _TreeNode, X):
    out = np.empty(len(X), dtype=np.int8)

    def walk(nd, idx):
        if nd.leaf >= 0:
            out[idx] = nd.leaf
            return
        mask = X[idx, nd.feature] <= nd.threshold
        walk(nd.left, idx[mask])
        walk(nd.right, idx[~mask])

    walk(node, np.arange(len(X)))
    return out


@dataclass
class ForestModel:
    config: ForestConfig
    n_features: int
    forests: list = field(default_factory=list)  # per label: list of _TreeNode


def train_forest(X, Y, cfg: ForestConfig = ForestConfig()) -> ForestModel:
    """One seeded forest per label (binary relevance)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0] or X.shape[0] < 1:
        raise ShapeMismatch(f"X {X.shape} vs Y {Y.shape}")
    n = X.shape[0]
    model = ForestModel(cfg, X.shape[1])
    # Columns that are constant over the training data can never yield a split
    # with positive gain, so drop them from the candidate pool up front.  This
    # also keeps the per-node feature draws (and hence the whole forest)
    # unchanged when a constant column is appended.
    pool = np.flatnonzero(X.max(axis=0) > X.min(axis=0))
    for lbl in range(Y.shape[1]):
        y = Y[:, lbl].astype(np.int64)
        trees = []
        for t in range(cfg.trees):
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence([cfg.seed & 0xFFFFFFFFFFFFFFFF, lbl, t])))
            boot = rng.integers(0, n, size=n)
            trees.append(_grow(X[boot], y[boot], rng, cfg, 0, pool))
        model.forests.append(trees)
    return model


def predict_forest(model: ForestModel, X):
    """Majority vote across trees per label; exact tie predicts 1."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeMismatch(f"expected width {model.n_features}, got {X.shape}")
    n_trees = model.config.trees
    yhat = np.zeros((len(X), len(model.forests)), dtype=np.int8)
    for lbl, trees in enumerate(model.forests):
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in trees:
            votes += _tree_predict(tree, X)
        yhat[:, lbl] = (2 * votes >= n_trees).astype(np.int8)
    return yhat


# ------------------------------------------------------------------- ML-kNN

@dataclass
class MlknnModel:
    config: MlknnConfig
    mean: np.ndarray
    std: np.ndarray
    xz: np.ndarray          # standardized training features
    y: np.ndarray
    prior1: np.ndarray      # per label P(H1)
    cond1: np.ndarray       # L x (k+1): P(delta | H1)
    cond0: np.ndarray


def _nearest(xz_train, query, k, exclude=-1):
    """Indices of the k nearest training rows, ties broken by row index."""
    d = np.sum((xz_train - query) ** 2, axis=1)
    if exclude >= 0:
        d[exclude] = np.inf
    order = np.lexsort((np.arange(len(d)), d))
    return order[:k]


def train_mlknn(X, Y, cfg: MlknnConfig = MlknnConfig()) -> MlknnModel:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y).astype(np.int64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ShapeMismatch(f"X {X.shape} vs Y {Y.shape}")
    n, L = Y.shape
    if cfg.k >= n:
        raise KTooLarge(f"k={cfg.k} must be smaller than n_train={n}")
    s = cfg.smoothing
    k = cfg.k
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    xz = (X - mean) / std

    prior1 = (s + Y.sum(axis=0)) / (2.0 * s + n)
    c1 = np.zeros((L, k + 1), dtype=np.int64)
    c0 = np.zeros((L, k + 1), dtype=np.int64)
    for i in range(n):
        nbrs = _nearest(xz, xz[i], k, exclude=i)
        delta = Y[nbrs].sum(axis=0)
        for j in range(L):
            if Y[i, j] == 1:
                c1[j, delta[j]] += 1
            else:
                c0[j, delta[j]] += 1
    cond1 = (s + c1) / (s * (k + 1) + c1.sum(axis=1, keepdims=True))
    cond0 = (s + c0) / (s * (k + 1) + c0.sum(axis=1, keepdims=True))
    return MlknnModel(cfg, mean, std, xz, Y, prior1, cond1, cond0)


def predict_mlknn(model: MlknnModel, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.xz.shape[1]:
        raise ShapeMismatch(f"expected width {model.xz.shape[1]}, got {X.shape}")
    k = model.config.k
    L = model.y.shape[1]
    xz = (X - model.mean) / model.std
    yhat = np.zeros((len(X), L), dtype=np.int8)
    for i in range(len(X)):
        nbrs = _nearest(model.xz, xz[i], k)
        delta = model.y[nbrs].sum(axis=0)
        for j in range(L):
            p1 = model.prior1[j] * model.cond1[j, delta[j]]
            p0 = (1.0 - model.prior1[j]) * model.cond0[j, delta[j]]
            yhat[i, j] = int(p1 >= p0)
    return yhat


# ------------------------------------------------------------------- metrics

def metrics(y_true, y_hat) -> MetricTriple:
    """Example-based Jaccard accuracy, Hamming loss and micro-F1.

    Empty-vs-empty label sets count as a perfect match (0/0 := 1), both for
    the per-example Jaccard term and for micro-F1.
    """
    y_true = np.asarray(y_true).astype(np.int8)
    y_hat = np.asarray(y_hat).astype(np.int8)
    if y_true.shape != y_hat.shape or y_true.ndim != 2:
        raise ShapeMismatch(f"{y_true.shape} vs {y_hat.shape}")
    m, L = y_true.shape
    hl = float(np.mean(y_true != y_hat))
    inter = np.sum((y_true == 1) & (y_hat == 1), axis=1)
    union = np.sum((y_true == 1) | (y_hat == 1), axis=1)
    jac = np.where(union == 0, 1.0, inter / np.where(union == 0, 1, union))
    acc = float(np.mean(jac))
    tp = int(np.sum((y_true == 1) & (y_hat == 1)))
    fp = int(np.sum((y_true == 0) & (y_hat == 1)))
    fn = int(np.sum((y_true == 1) & (y_hat == 0)))
    denom = 2 * tp + fp + fn
    micro = 1.0 if denom == 0 else 2.0 * tp / denom
    return MetricTriple(acc, hl, micro)
