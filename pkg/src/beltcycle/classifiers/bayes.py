"""Gaussian naive Bayes with closed-form moment estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Variance floor, relative to the largest per-feature variance.
VAR_FLOOR_RATIO = 1e-9


@dataclass
class GaussianNBModel:
    priors: np.ndarray     # (C,)
    means: np.ndarray      # (C, F)
    variances: np.ndarray  # (C, F), floored away from zero
    n_classes: int
    n_features: int
    hyperparameters: dict | None = None

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        with np.errstate(divide="ignore"):
            log_prior = np.log(self.priors)
        diff = X[:, None, :] - self.means[None, :, :]
        log_like = -0.5 * (
            np.log(2.0 * np.pi * self.variances)[None, :, :]
            + diff * diff / self.variances[None, :, :]
        ).sum(axis=2)
        joint = log_prior[None, :] + log_like
        joint -= joint.max(axis=1, keepdims=True)
        e = np.exp(joint)
        return e / e.sum(axis=1, keepdims=True)


def train_gnb(X: np.ndarray, y: np.ndarray, n_classes: int) -> GaussianNBModel:
    """Per-class priors, feature means and floored feature variances.

    Classes absent from y get zero prior (they are never predicted) and
    placeholder moments.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("Gaussian NB needs at least two classes in the training set")
    floor = VAR_FLOOR_RATIO * max(float(X.var(axis=0).max()), 1e-30)
    priors = np.zeros(n_classes)
    means = np.zeros((n_classes, X.shape[1]))
    variances = np.ones((n_classes, X.shape[1]))
    for c in range(n_classes):
        members = X[y == c]
        if len(members) == 0:
            continue
        priors[c] = len(members) / len(y)
        means[c] = members.mean(axis=0)
        variances[c] = np.maximum(members.var(axis=0), floor)
    return GaussianNBModel(priors, means, variances, n_classes, X.shape[1],
                           hyperparameters={})
