"""Tree ensembles: single trees, bagging variants and gradient boosting.

A plain decision tree is the one-member special case so that every
tree-based family shares a model type, a prediction path and a
serialization. Per-tree RNG streams derive from (seed, tree index), so
training could be parallelized across trees without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .trees import Tree, train_regression_tree, train_tree

ENSEMBLE_KINDS = ("dt", "rf", "et", "xgb")


@dataclass
class EnsembleModel:
    kind: str
    trees: list[Tree]
    n_trees: int
    max_depth: int | None
    criterion: str
    n_classes: int
    n_features: int
    learning_rate: float = 0.3  # xgb shrinkage; unused by the other kinds
    hyperparameters: dict = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        if self.kind == "xgb":
            scores = np.zeros((len(X), self.n_classes))
            for r in range(self.n_trees):
                for c in range(self.n_classes):
                    tree = self.trees[r * self.n_classes + c]
                    scores[:, c] += self.learning_rate * tree.predict_value(X)[:, 0]
            return _softmax(scores)
        probs = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            probs += tree.predict_value(X)
        return probs / len(self.trees)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _tree_rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def train_ensemble(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_trees: int = 50,
    max_depth: int | None = 10,
    criterion: str = "gini",
    seed: int = 0,
    learning_rate: float = 0.3,
    bootstrap: bool = True,
) -> EnsembleModel:
    """Train one of the four tree families.

    dt: a single exhaustive-split tree (deterministic, seed ignored).
    rf: bootstrap resampling per tree, sqrt-subset split candidates.
    et: full sample per tree, uniformly random thresholds.
    xgb: stagewise one-vs-rest regression trees on softmax residuals with
    shrinkage; n_trees counts boosting rounds, each holding one tree per
    class (stored round-major).
    """
    if kind not in ENSEMBLE_KINDS:
        raise ValueError(f"unknown ensemble kind {kind!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    hyper = {"n_trees": n_trees, "max_depth": max_depth, "criterion": criterion}

    if kind == "dt":
        trees = [train_tree(X, y, n_classes, max_depth, criterion, "exhaustive")]
        return EnsembleModel("dt", trees, 1, max_depth, criterion, n_classes, X.shape[1],
                             hyperparameters={"max_depth": max_depth, "criterion": criterion})

    if kind in ("rf", "et"):
        trees = []
        for rng in _tree_rngs(seed, n_trees):
            if kind == "rf":
                idx = rng.integers(0, len(X), size=len(X)) if bootstrap else np.arange(len(X))
                trees.append(train_tree(X[idx], y[idx], n_classes, max_depth, criterion,
                                        "random_subset", rng))
            else:
                trees.append(train_tree(X, y, n_classes, max_depth, criterion,
                                        "fully_random", rng))
        return EnsembleModel(kind, trees, n_trees, max_depth, criterion, n_classes,
                             X.shape[1], hyperparameters=hyper)

    # xgb: additive log-odds model, squared-loss leaf estimates.
    hyper["learning_rate"] = learning_rate
    onehot = np.zeros((len(y), n_classes))
    onehot[np.arange(len(y)), y] = 1.0
    scores = np.zeros((len(y), n_classes))
    trees = []
    for _ in range(n_trees):
        p = _softmax(scores)
        residual = onehot - p
        for c in range(n_classes):
            tree = train_regression_tree(X, residual[:, c], max_depth)
            trees.append(tree)
            scores[:, c] += learning_rate * tree.predict_value(X)[:, 0]
    return EnsembleModel("xgb", trees, n_trees, max_depth, criterion, n_classes,
                         X.shape[1], learning_rate=learning_rate, hyperparameters=hyper)
