"""Training-set resampling: SMOTE, SMOTEN and random undersampling.

These operate on training data only; evaluation folds must never pass
through here. All operations are deterministic given their seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datamodel import OperationMode


@dataclass(frozen=True)
class BalanceRecipe:
    """Per-class resampling actions applied to a mode training set."""

    oversample: dict[int, float] = field(default_factory=dict)
    undersample: dict[int, float] = field(default_factory=dict)
    k_neighbors: int = 5


#: Doubles the two minority mode classes and keeps 20% of Idle.
MODE_RECIPE = BalanceRecipe(
    oversample={int(OperationMode.OFF): 1.0, int(OperationMode.OPERATIONAL): 1.0},
    undersample={int(OperationMode.IDLE): 0.2},
)


def _nearest_neighbors(points: np.ndarray, k: int, metric: str) -> np.ndarray:
    """Indices (n, k) of each point's k nearest same-set neighbors (self excluded).

    Brute force, row-chunked to bound memory; ties broken by lower index.
    """
    n, n_dim = points.shape
    k = min(k, n - 1)
    out = np.empty((n, k), dtype=np.int64)
    chunk = max(1, int(4e6) // max(n, 1))
    if metric == "euclidean":
        pts = points.astype(np.float64)
        sq = (pts ** 2).sum(axis=1)
    elif metric != "hamming":
        raise ValueError(f"unknown metric {metric!r}")
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = points[start:stop]
        if metric == "euclidean":
            d = sq[start:stop, None] + sq[None, :] - 2.0 * (pts[start:stop] @ pts.T)
            d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        else:
            d = np.zeros((stop - start, n), dtype=np.int32)
            for j in range(n_dim):
                d += block[:, j, None] != points[None, :, j]
            d[np.arange(stop - start), np.arange(start, stop)] = n_dim + 1
        order = np.argsort(d, axis=1, kind="stable")
        out[start:stop] = order[:, :k]
    return out


def smote_oversample(
    features: np.ndarray,
    labels: np.ndarray,
    target_class: int,
    fraction: float,
    k: int = 5,
    seed: int = 0,
) -> np.ndarray:
    """Interpolated synthetic samples for one class.

    Generates floor(fraction * class_count) vectors; each is
    x + u * (x_nn - x) for a random class member x, one of its k nearest
    same-class neighbors x_nn (Euclidean), and u uniform in [0, 1]. Every
    synthetic sample therefore lies on a segment between two originals.
    """
    if fraction < 0:
        raise ValueError("fraction must be non-negative")
    members = features[labels == target_class]
    n = len(members)
    n_new = int(math.floor(fraction * n))
    if n_new == 0:
        return np.empty((0, features.shape[1]), dtype=features.dtype)
    if n < k + 1:
        raise ValueError(
            f"class {target_class} has {n} samples; SMOTE with k={k} needs at least {k + 1}"
        )
    rng = np.random.default_rng(seed)
    neighbors = _nearest_neighbors(members, k, "euclidean")
    base_idx = rng.integers(0, n, size=n_new)
    nn_pick = rng.integers(0, neighbors.shape[1], size=n_new)
    u = rng.random(n_new)
    base = members[base_idx]
    nn = members[neighbors[base_idx, nn_pick]]
    return base + u[:, None] * (nn - base)


def smoten_oversample(
    vectors: np.ndarray,
    labels: np.ndarray,
    target_class: int,
    target_count: int,
    k: int = 5,
    seed: int = 0,
) -> np.ndarray:
    """Categorical synthetic samples bringing one class up to target_count.

    Each synthetic vector takes, position by position, the majority value
    among the k nearest neighbors (Hamming distance) of a randomly chosen
    class member; ties fall back to that member's own value. A singleton
    class yields exact copies.
    """
    members = vectors[labels == target_class]
    n = len(members)
    if n == 0:
        raise ValueError(f"class {target_class} has no samples")
    n_new = max(0, target_count - n)
    if n_new == 0:
        return np.empty((0, vectors.shape[1]), dtype=vectors.dtype)
    rng = np.random.default_rng(seed)
    base_idx = rng.integers(0, n, size=n_new)
    if n == 1:
        return np.repeat(members, n_new, axis=0)
    neighbors = _nearest_neighbors(members, k, "hamming")
    out = np.empty((n_new, vectors.shape[1]), dtype=vectors.dtype)
    for row, bi in enumerate(base_idx):
        nn_vals = members[neighbors[bi]]
        for j in range(vectors.shape[1]):
            values, counts = np.unique(nn_vals[:, j], return_counts=True)
            top = counts.max()
            winners = values[counts == top]
            out[row, j] = winners[0] if len(winners) == 1 else members[bi, j]
    return out


def random_undersample(
    features: np.ndarray,
    labels: np.ndarray,
    target_class: int,
    keep_fraction: float,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Keep ceil(keep_fraction * n) uniformly chosen samples of one class.

    Other classes pass through untouched; original ordering is preserved.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    idx = np.nonzero(labels == target_class)[0]
    n_keep = math.ceil(keep_fraction * len(idx))
    rng = np.random.default_rng(seed)
    kept = rng.choice(idx, size=n_keep, replace=False)
    mask = np.ones(len(labels), dtype=bool)
    mask[idx] = False
    mask[np.sort(kept)] = True
    return features[mask], labels[mask]


def balance_mode_training_set(
    features: np.ndarray,
    labels: np.ndarray,
    seed: int = 0,
    recipe: BalanceRecipe = MODE_RECIPE,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the mode-classifier balancing recipe to a training set.

    Default recipe: SMOTE fraction 1.0 on Off and Operational (doubling
    them), random undersampling keeping 20% of Idle, Active untouched.
    Requires all four modes to be present.
    """
    for mode in (OperationMode.OFF, OperationMode.IDLE, OperationMode.OPERATIONAL,
                 OperationMode.ACTIVE):
        if not np.any(labels == int(mode)):
            raise ValueError(f"training set is missing mode {mode.display_name}")
    seeds = np.random.SeedSequence(seed).generate_state(1 + len(recipe.oversample))
    out_x, out_y = features, labels
    for cls, keep in sorted(recipe.undersample.items()):
        out_x, out_y = random_undersample(out_x, out_y, cls, keep, seed=int(seeds[0]))
    extra_x = []
    extra_y = []
    for i, (cls, fraction) in enumerate(sorted(recipe.oversample.items())):
        synthetic = smote_oversample(
            features, labels, cls, fraction, k=recipe.k_neighbors, seed=int(seeds[1 + i])
        )
        extra_x.append(synthetic)
        extra_y.append(np.full(len(synthetic), cls, dtype=labels.dtype))
    bal_x = np.concatenate([out_x] + extra_x, axis=0)
    bal_y = np.concatenate([out_y] + extra_y, axis=0)
    return bal_x, bal_y
