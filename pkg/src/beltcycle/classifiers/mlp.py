"""Single-hidden-layer perceptron trained with minibatch SGD.

Float64 throughout so analytic gradients can be checked against central
finite differences. Hidden activation is ReLU, output is softmax, loss is
cross-entropy. Optional per-feature min-max scaling is stored inside the
model (disabled by default) for cases where raw input scales stall SGD.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MLPModel:
    w1: np.ndarray  # (F, H)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, C)
    b2: np.ndarray  # (C,)
    feature_low: np.ndarray | None = None
    feature_span: np.ndarray | None = None
    loss_history: list[float] = field(default_factory=list)
    hyperparameters: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.w1.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]

    def scale_inputs(self, X: np.ndarray) -> np.ndarray:
        if self.feature_low is None:
            return X
        return (X - self.feature_low) / self.feature_span

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        _, _, probs = forward(self.w1, self.b1, self.w2, self.b2, self.scale_inputs(X))
        return probs


def forward(
    w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray, X: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (pre-activation hidden, hidden, softmax probabilities)."""
    z1 = X @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2 + b2
    shifted = z2 - z2.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return z1, a1, e / e.sum(axis=1, keepdims=True)


def cross_entropy_loss(
    w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray,
    X: np.ndarray, y: np.ndarray,
) -> float:
    """Mean negative log-likelihood, computed in log-sum-exp form."""
    z1 = X @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2 + b2
    m = z2.max(axis=1)
    lse = m + np.log(np.exp(z2 - m[:, None]).sum(axis=1))
    return float((lse - z2[np.arange(len(y)), y]).mean())


def gradients(
    w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray,
    X: np.ndarray, y: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of cross_entropy_loss w.r.t. the four tensors."""
    z1, a1, probs = forward(w1, b1, w2, b2, X)
    dz2 = probs.copy()
    dz2[np.arange(len(y)), y] -= 1.0
    dz2 /= len(y)
    dw2 = a1.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ w2.T
    dz1 = da1 * (z1 > 0.0)
    dw1 = X.T @ dz1
    db1 = dz1.sum(axis=0)
    return dw1, db1, dw2, db2


def train_mlp(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    hidden: int = 12,
    learning_rate: float = 0.01,
    epochs: int = 200,
    batch_size: int = 32,
    seed: int = 0,
    scale_features: bool = False,
) -> MLPModel:
    """Minibatch SGD on cross-entropy; deterministic given the seed.

    He-initialized weights, constant learning rate, no early stopping
    beyond the epoch cap. loss_history records the mean minibatch loss of
    each epoch.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("MLP training needs at least two classes")
    low = span = None
    if scale_features:
        low = X.min(axis=0)
        span = np.maximum(X.max(axis=0) - low, 1e-12)
        X = (X - low) / span

    rng = np.random.default_rng(seed)
    n_features = X.shape[1]
    w1 = rng.normal(0.0, np.sqrt(2.0 / n_features), size=(n_features, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, n_classes))
    b2 = np.zeros(n_classes)

    history = []
    n = len(X)
    for _ in range(epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, batch_size):
            take = perm[start:start + batch_size]
            xb, yb = X[take], y[take]
            dw1, db1, dw2, db2 = gradients(w1, b1, w2, b2, xb, yb)
            epoch_loss += cross_entropy_loss(w1, b1, w2, b2, xb, yb)
            n_batches += 1
            w1 -= learning_rate * dw1
            b1 -= learning_rate * db1
            w2 -= learning_rate * dw2
            b2 -= learning_rate * db2
        history.append(epoch_loss / n_batches)

    return MLPModel(
        w1=w1, b1=b1, w2=w2, b2=b2, feature_low=low, feature_span=span,
        loss_history=history,
        hyperparameters={"hidden": hidden, "learning_rate": learning_rate,
                         "epochs": epochs, "batch_size": batch_size,
                         "scale_features": scale_features},
    )
