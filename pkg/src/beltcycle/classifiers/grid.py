"""Hyperparameter grids, stratified cross-validation and grid search.

Model selection runs 5-fold CV on the (already balanced) training set,
scores each grid point by fold-averaged macro F1 over sample labels, and
refits the winner on the full training set. Score ties resolve toward the
smaller model: fewer trees, then shallower depth, then fewer neurons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bayes import train_gnb
from .ensemble import train_ensemble
from .mlp import train_mlp
from .trees import train_tree
from .ensemble import EnsembleModel


@dataclass(frozen=True)
class HyperGrid:
    family: str
    points: tuple[dict, ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("empty hyperparameter grid")


def default_grid(family: str) -> HyperGrid:
    """The full search space per family."""
    if family == "dt":
        points = [
            {"max_depth": d, "criterion": c}
            for d in (10, 20, 30, 40, 50, None)
            for c in ("gini", "entropy")
        ]
    elif family in ("rf", "et", "xgb"):
        points = [
            {"n_trees": t, "max_depth": d}
            for t in (10, 25, 50)
            for d in (4, 6, 8, 10)
        ]
    elif family == "mlp":
        points = [
            {"hidden": h, "learning_rate": lr}
            for h in range(4, 16)
            for lr in (0.1, 0.01, 0.001)
        ]
    elif family == "gnb":
        points = [{}]
    else:
        raise ValueError(f"unknown model family {family!r}")
    return HyperGrid(family, tuple(points))


def default_params(family: str) -> dict:
    """Fixed hyperparameters used when no grid search is requested."""
    return {
        "dt": {"max_depth": None, "criterion": "gini"},
        "rf": {"n_trees": 50, "max_depth": 10},
        "et": {"n_trees": 50, "max_depth": 10},
        "xgb": {"n_trees": 25, "max_depth": 4},
        "gnb": {},
        "mlp": {"hidden": 12, "learning_rate": 0.001},
    }[family]


def train_family(
    family: str, X: np.ndarray, y: np.ndarray, n_classes: int, params: dict, seed: int = 0
):
    """Dispatch to the family trainer with one hyperparameter dict."""
    if family == "dt":
        tree = train_tree(X, y, n_classes, params.get("max_depth"),
                          params.get("criterion", "gini"), "exhaustive")
        return EnsembleModel("dt", [tree], 1, params.get("max_depth"),
                             params.get("criterion", "gini"), n_classes, X.shape[1],
                             hyperparameters=dict(params))
    if family in ("rf", "et"):
        return train_ensemble(family, X, y, n_classes,
                              n_trees=params.get("n_trees", 50),
                              max_depth=params.get("max_depth", 10),
                              criterion=params.get("criterion", "gini"),
                              seed=seed)
    if family == "xgb":
        return train_ensemble("xgb", X, y, n_classes,
                              n_trees=params.get("n_trees", 25),
                              max_depth=params.get("max_depth", 4),
                              learning_rate=params.get("learning_rate", 0.3),
                              seed=seed)
    if family == "gnb":
        return train_gnb(X, y, n_classes)
    if family == "mlp":
        return train_mlp(X, y, n_classes,
                         hidden=params.get("hidden", 12),
                         learning_rate=params.get("learning_rate", 0.01),
                         epochs=params.get("epochs", 200),
                         batch_size=params.get("batch_size", 32),
                         seed=seed,
                         scale_features=params.get("scale_features", False))
    raise ValueError(f"unknown model family {family!r}")


def predict(model, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Class and probability vector for one feature vector.

    Ties in the probability vector resolve to the lowest class ordinal.
    """
    probs = model.predict_proba(np.atleast_2d(x))[0]
    return int(np.argmax(probs)), probs


def predict_labels(model, X: np.ndarray) -> np.ndarray:
    return np.argmax(model.predict_proba(X), axis=1)


def f1_binary_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def macro_f1(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> float:
    """Unweighted mean of per-class F1 over all n_classes labels."""
    scores = []
    for c in range(n_classes):
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        fp = int(np.sum((y_pred == c) & (y_true != c)))
        fn = int(np.sum((y_pred != c) & (y_true == c)))
        scores.append(f1_binary_counts(tp, fp, fn))
    return float(np.mean(scores))


def stratified_kfold_indices(y: np.ndarray, k: int, seed: int = 0) -> list[np.ndarray]:
    """Disjoint index folds covering 0..n-1, class-stratified, shuffled."""
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in np.unique(y):
        members = np.nonzero(y == c)[0]
        members = members[rng.permutation(len(members))]
        for i, m in enumerate(members):
            folds[i % k].append(int(m))
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def _complexity(params: dict) -> tuple:
    depth = params.get("max_depth")
    return (
        params.get("n_trees", 1),
        math.inf if depth is None else depth,
        params.get("hidden", 0),
    )


def grid_search(
    family: str,
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    grid: HyperGrid | None = None,
    seed: int = 0,
    n_folds: int = 5,
) -> tuple[dict, object, list[tuple[dict, float]]]:
    """Select hyperparameters by CV macro F1 and refit on the full set.

    Returns (best_params, refit_model, [(params, mean_cv_score), ...]).
    """
    if grid is None:
        grid = default_grid(family)
    if grid.family != family:
        raise ValueError(f"grid is for family {grid.family!r}, not {family!r}")
    folds = stratified_kfold_indices(y, n_folds, seed)
    table: list[tuple[dict, float]] = []
    best: tuple[float, tuple, int] | None = None  # (-score, complexity, index)
    for gi, params in enumerate(grid.points):
        fold_scores = []
        for fi, val_idx in enumerate(folds):
            if len(val_idx) == 0:
                continue
            train_mask = np.ones(len(y), dtype=bool)
            train_mask[val_idx] = False
            fold_seed = int(np.random.SeedSequence([seed, gi, fi]).generate_state(1)[0])
            model = train_family(family, X[train_mask], y[train_mask], n_classes,
                                 params, seed=fold_seed)
            y_hat = predict_labels(model, X[val_idx])
            fold_scores.append(macro_f1(y[val_idx], y_hat, n_classes))
        score = float(np.mean(fold_scores))
        table.append((params, score))
        key = (-score, _complexity(params), gi)
        if best is None or key < best:
            best = key
    best_params = grid.points[best[2]]
    refit = train_family(family, X, y, n_classes, best_params, seed=seed)
    return dict(best_params), refit, table
