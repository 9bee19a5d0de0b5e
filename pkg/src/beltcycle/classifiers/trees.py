"""Binary decision trees: greedy impurity-based training and array inference.

Trees are stored as flat parallel arrays so inference vectorizes and the
same structure serves float and integer-threshold (quantized) variants.
Three split modes cover the tree families built on top:

* ``exhaustive``: scan every feature and every midpoint between sorted
  distinct values (plain decision trees, boosting base learners).
* ``random_subset``: exhaustive thresholds on sqrt(n_features) randomly
  drawn features per node (random forest).
* ``fully_random``: one uniform random threshold per candidate feature,
  candidates drawn as in random_subset (extra trees).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LEAF = -1

SPLIT_MODES = ("exhaustive", "random_subset", "fully_random")


@dataclass
class Tree:
    """Flat-array binary tree. feature[i] == LEAF marks node i as a leaf.

    value holds one row per node: a class-probability vector for
    classification trees, a length-1 mean target for regression trees.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            for child in (self.left[i], self.right[i]):
                if child != LEAF:
                    depths[child] = depths[i] + 1
        return int(depths.max()) if self.n_nodes else 0

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        leaf_idx = descend(self.feature, self.threshold, self.left, self.right, X)
        return self.value[leaf_idx]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Single-sample descent (used by the streaming path)."""
        node = 0
        while self.feature[node] != LEAF:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return self.value[node]


def descend(
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    X: np.ndarray,
) -> np.ndarray:
    """Vectorized root-to-leaf descent; returns the leaf index per row.

    Works for any comparable dtype pair (float thresholds with float X,
    integer thresholds with integer X) using `<=` to go left.
    """
    n = len(X)
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        feat = feature[node]
        active = feat != LEAF
        if not active.any():
            return node
        xi = X[rows, np.where(active, feat, 0)]
        go_left = xi <= threshold[node]
        nxt = np.where(go_left, left[node], right[node])
        node = np.where(active, nxt, node)


def _class_impurity(counts: np.ndarray, totals: np.ndarray, criterion: str) -> np.ndarray:
    """Impurity per row of `counts` (rows sum to the matching `totals`)."""
    p = counts / totals[:, None]
    if criterion == "gini":
        return 1.0 - (p * p).sum(axis=1)
    if criterion == "entropy":
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(p > 0, np.log2(p, where=p > 0), 0.0)
        return -(p * logs).sum(axis=1)
    raise ValueError(f"unknown criterion {criterion!r}")


def _best_exhaustive_classification(
    x: np.ndarray, onehot: np.ndarray, criterion: str
) -> tuple[float, float] | None:
    """Best midpoint threshold on one feature; returns (threshold, score)."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if xs[0] == xs[-1]:
        return None
    boundary = np.nonzero(xs[1:] > xs[:-1])[0] + 1
    if len(boundary) == 0:
        return None
    n = len(xs)
    prefix = np.cumsum(onehot[order], axis=0)
    left_counts = prefix[boundary - 1]
    right_counts = prefix[-1] - left_counts
    nl = boundary.astype(np.float64)
    nr = n - nl
    score = (
        nl * _class_impurity(left_counts, nl, criterion)
        + nr * _class_impurity(right_counts, nr, criterion)
    ) / n
    j = int(np.argmin(score))
    cut = boundary[j]
    return (xs[cut - 1] + xs[cut]) / 2.0, float(score[j])


def _best_exhaustive_regression(x: np.ndarray, g: np.ndarray) -> tuple[float, float] | None:
    """Best variance-reducing midpoint threshold for a regression target."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if xs[0] == xs[-1]:
        return None
    boundary = np.nonzero(xs[1:] > xs[:-1])[0] + 1
    if len(boundary) == 0:
        return None
    gs = g[order]
    n = len(xs)
    s1 = np.cumsum(gs)
    s2 = np.cumsum(gs * gs)
    nl = boundary.astype(np.float64)
    nr = n - nl
    sl1 = s1[boundary - 1]
    sl2 = s2[boundary - 1]
    sse_left = sl2 - sl1 * sl1 / nl
    sse_right = (s2[-1] - sl2) - (s1[-1] - sl1) ** 2 / nr
    score = (sse_left + sse_right) / n
    j = int(np.argmin(score))
    cut = boundary[j]
    return (xs[cut - 1] + xs[cut]) / 2.0, float(score[j])


def _random_threshold_score(
    x: np.ndarray, onehot: np.ndarray, criterion: str, rng: np.random.Generator
) -> tuple[float, float] | None:
    lo = x.min()
    hi = x.max()
    if lo == hi:
        return None
    thr = float(rng.uniform(lo, hi))
    mask = x <= thr
    nl = int(mask.sum())
    nr = len(x) - nl
    if nl == 0 or nr == 0:
        return None
    left_counts = onehot[mask].sum(axis=0)[None, :]
    right_counts = onehot[~mask].sum(axis=0)[None, :]
    score = (
        nl * _class_impurity(left_counts, np.array([float(nl)]), criterion)[0]
        + nr * _class_impurity(right_counts, np.array([float(nr)]), criterion)[0]
    ) / len(x)
    return thr, float(score)


class _TreeBuilder:
    def __init__(self, n_features: int, n_out: int):
        self.n_features = n_features
        self.n_out = n_out
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []

    def add_node(self, value: np.ndarray) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        return len(self.feature) - 1

    def finish(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.stack(self.value),
            n_features=self.n_features,
        )


def _candidate_features(
    n_features: int, split_mode: str, rng: np.random.Generator | None
) -> np.ndarray:
    if split_mode == "exhaustive":
        return np.arange(n_features)
    assert rng is not None, "random split modes require an rng"
    m = max(1, int(round(math.sqrt(n_features))))
    return np.sort(rng.choice(n_features, size=m, replace=False))


def train_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_depth: int | None = None,
    criterion: str = "gini",
    split_mode: str = "exhaustive",
    rng: np.random.Generator | None = None,
) -> Tree:
    """Greedy top-down classification tree.

    Recursion stops at max_depth (None = unbounded), on pure nodes, on
    nodes with fewer than 2 samples, or when no feature admits a valid
    split. Leaves store the class distribution of their training samples.
    """
    if split_mode not in SPLIT_MODES:
        raise ValueError(f"unknown split mode {split_mode!r}")
    if len(X) == 0:
        raise ValueError("training set is empty")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    onehot = np.zeros((len(y), n_classes), dtype=np.float64)
    onehot[np.arange(len(y)), y] = 1.0

    builder = _TreeBuilder(X.shape[1], n_classes)
    root = builder.add_node(np.zeros(n_classes))
    stack: list[tuple[int, np.ndarray, int]] = [(root, np.arange(len(X)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = onehot[idx].sum(axis=0)
        builder.value[node] = counts / counts.sum()
        pure = np.count_nonzero(counts) <= 1
        if pure or len(idx) < 2 or (max_depth is not None and depth >= max_depth):
            continue
        best: tuple[float, int, float] | None = None  # (score, feature, threshold)
        for f in _candidate_features(X.shape[1], split_mode, rng):
            col = X[idx, f]
            if split_mode == "fully_random":
                found = _random_threshold_score(col, onehot[idx], criterion, rng)
            else:
                found = _best_exhaustive_classification(col, onehot[idx], criterion)
            if found is not None and (best is None or found[1] < best[0]):
                best = (found[1], int(f), found[0])
        if best is None:
            continue
        _, feat, thr = best
        mask = X[idx, feat] <= thr
        builder.feature[node] = feat
        builder.threshold[node] = thr
        left = builder.add_node(np.zeros(n_classes))
        right = builder.add_node(np.zeros(n_classes))
        builder.left[node] = left
        builder.right[node] = right
        stack.append((left, idx[mask], depth + 1))
        stack.append((right, idx[~mask], depth + 1))
    return builder.finish()


def train_regression_tree(
    X: np.ndarray,
    g: np.ndarray,
    max_depth: int | None = None,
) -> Tree:
    """Least-squares regression tree (exhaustive splits, mean-value leaves)."""
    if len(X) == 0:
        raise ValueError("training set is empty")
    X = np.asarray(X, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    builder = _TreeBuilder(X.shape[1], 1)
    root = builder.add_node(np.zeros(1))
    stack: list[tuple[int, np.ndarray, int]] = [(root, np.arange(len(X)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        target = g[idx]
        builder.value[node] = np.array([target.mean()])
        if len(idx) < 2 or (max_depth is not None and depth >= max_depth):
            continue
        if np.all(target == target[0]):
            continue
        best: tuple[float, int, float] | None = None
        for f in range(X.shape[1]):
            found = _best_exhaustive_regression(X[idx, f], target)
            if found is not None and (best is None or found[1] < best[0]):
                best = (found[1], f, found[0])
        if best is None:
            continue
        _, feat, thr = best
        mask = X[idx, feat] <= thr
        builder.feature[node] = feat
        builder.threshold[node] = thr
        left = builder.add_node(np.zeros(1))
        right = builder.add_node(np.zeros(1))
        builder.left[node] = left
        builder.right[node] = right
        stack.append((left, idx[mask], depth + 1))
        stack.append((right, idx[~mask], depth + 1))
    return builder.finish()
