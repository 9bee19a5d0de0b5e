"""Post-training 8-bit integer quantization of the deployed models.

Tree models quantize their split thresholds into the input quantizer's
integer units, so inference compares int8 feature codes against int8
thresholds with unchanged `<=` semantics. The perceptron quantizes weights
per-tensor symmetrically and activations per-layer affinely; its inference
path is integer-only (fixed-point requantization between layers, argmax on
raw integer output scores), hence bit-exact across runs and platforms.
Calibration uses plain min/max: the sensed quantities are physically
bounded, so no percentile clipping is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers.ensemble import EnsembleModel, _softmax
from .classifiers.mlp import MLPModel, forward
from .classifiers.trees import LEAF, Tree, descend

INT8_MIN = -128
INT8_MAX = 127
INT8_LEVELS = 255


@dataclass(frozen=True)
class AffineQuantizer:
    """x ~ (q - zero_point) * scale with q clamped to int8."""

    scale: float
    zero_point: int

    def quantize(self, x: np.ndarray | float) -> np.ndarray:
        q = np.round(np.asarray(x, dtype=np.float64) / self.scale) + self.zero_point
        return np.clip(q, INT8_MIN, INT8_MAX).astype(np.int64)

    def dequantize(self, q: np.ndarray | int) -> np.ndarray:
        return (np.asarray(q, dtype=np.float64) - self.zero_point) * self.scale


def calibrate_tensor(values: np.ndarray) -> AffineQuantizer:
    """Affine quantizer covering [min, max] of the calibration values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("calibration requires at least one sample")
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        # Degenerate constant input: map the constant to code 0.
        zp = int(np.clip(round(-lo), INT8_MIN, INT8_MAX))
        return AffineQuantizer(1.0, zp)
    scale = (hi - lo) / INT8_LEVELS
    zp = int(np.clip(round(INT8_MIN - lo / scale), INT8_MIN, INT8_MAX))
    return AffineQuantizer(scale, zp)


def calibrate(samples: np.ndarray) -> list[AffineQuantizer]:
    """One quantizer per feature column of the calibration matrix."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    return [calibrate_tensor(samples[:, j]) for j in range(samples.shape[1])]


# --------------------------------------------------------------------------
# Trees


@dataclass
class QuantizedTree:
    feature: np.ndarray
    threshold: np.ndarray  # int8 codes in the input quantizer's units
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


@dataclass
class QuantizedTreeModel:
    kind: str
    trees: list[QuantizedTree]
    n_trees: int
    n_classes: int
    n_features: int
    input_quantizers: list[AffineQuantizer]
    learning_rate: float = 0.3
    clamped_thresholds: int = 0
    hyperparameters: dict = field(default_factory=dict)

    def quantize_inputs(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        q = np.empty(X.shape, dtype=np.int64)
        for j, quant in enumerate(self.input_quantizers):
            q[:, j] = quant.quantize(X[:, j])
        return q

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        q = self.quantize_inputs(X)
        if q.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {q.shape[1]}")
        if self.kind == "xgb":
            scores = np.zeros((len(q), self.n_classes))
            for r in range(self.n_trees):
                for c in range(self.n_classes):
                    t = self.trees[r * self.n_classes + c]
                    leaf = descend(t.feature, t.threshold, t.left, t.right, q)
                    scores[:, c] += self.learning_rate * t.value[leaf][:, 0]
            return _softmax(scores)
        probs = np.zeros((len(q), self.n_classes))
        for t in self.trees:
            leaf = descend(t.feature, t.threshold, t.left, t.right, q)
            probs += t.value[leaf]
        return probs / len(self.trees)


def quantize_tree_model(
    model: EnsembleModel, quantizers: list[AffineQuantizer]
) -> QuantizedTreeModel:
    """Map every split threshold into its feature's integer units.

    Thresholds falling outside int8 are clamped and counted in
    clamped_thresholds so the deployment report can flag them.
    """
    if len(quantizers) != model.n_features:
        raise ValueError("one quantizer per feature is required")
    clamped = 0
    qtrees = []
    for tree in model.trees:
        qthr = np.zeros(tree.n_nodes, dtype=np.int64)
        for i in range(tree.n_nodes):
            if tree.feature[i] == LEAF:
                continue
            quant = quantizers[int(tree.feature[i])]
            raw = round(tree.threshold[i] / quant.scale) + quant.zero_point
            if raw < INT8_MIN or raw > INT8_MAX:
                clamped += 1
            qthr[i] = int(np.clip(raw, INT8_MIN, INT8_MAX))
        qtrees.append(QuantizedTree(tree.feature.copy(), qthr, tree.left.copy(),
                                    tree.right.copy(), tree.value.copy()))
    return QuantizedTreeModel(
        kind=model.kind, trees=qtrees, n_trees=model.n_trees,
        n_classes=model.n_classes, n_features=model.n_features,
        input_quantizers=list(quantizers), learning_rate=model.learning_rate,
        clamped_thresholds=clamped, hyperparameters=dict(model.hyperparameters),
    )


# --------------------------------------------------------------------------
# Perceptron


def _fixed_point_multiplier(multiplier: float) -> tuple[int, int]:
    """(m0, right_shift) with multiplier ~ m0 * 2**-right_shift, m0 < 2**31."""
    if multiplier <= 0:
        raise ValueError("requantization multiplier must be positive")
    mantissa, exponent = math.frexp(multiplier)  # mantissa in [0.5, 1)
    m0 = int(round(mantissa * (1 << 31)))
    if m0 == (1 << 31):
        m0 //= 2
        exponent += 1
    return m0, 31 - exponent


def _rounded_right_shift(values: np.ndarray, shift: int) -> np.ndarray:
    if shift <= 0:
        return values << (-shift)
    half = np.int64(1) << (shift - 1)
    return (values + half) >> shift


@dataclass(frozen=True)
class _Requant:
    m0: int
    shift: int

    def apply(self, acc: np.ndarray) -> np.ndarray:
        return _rounded_right_shift(acc * np.int64(self.m0), self.shift)


@dataclass
class QuantizedMLPModel:
    input_quantizer: AffineQuantizer
    w1_q: np.ndarray        # int8 as int64
    b1_q: np.ndarray        # int32-range as int64
    hidden_quantizer: AffineQuantizer
    requant1: _Requant
    w2_q: np.ndarray
    b2_q: np.ndarray
    w1_scale: float
    w2_scale: float
    n_classes: int
    n_features: int
    hyperparameters: dict = field(default_factory=dict)

    def predict_scores_int(self, X: np.ndarray) -> np.ndarray:
        """Integer output-layer accumulators; argmax gives the class."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        q_in = self.input_quantizer.quantize(X)
        acc1 = (q_in - self.input_quantizer.zero_point) @ self.w1_q + self.b1_q
        q_act = self.requant1.apply(acc1) + self.hidden_quantizer.zero_point
        q_act = np.clip(q_act, self.hidden_quantizer.zero_point, INT8_MAX)  # fused ReLU
        acc2 = (q_act - self.hidden_quantizer.zero_point) @ self.w2_q + self.b2_q
        return acc2

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        scores = self.predict_scores_int(X).astype(np.float64)
        out_scale = self.hidden_quantizer.scale * self.w2_scale
        return _softmax(scores * out_scale)


def _symmetric_weight_scale(w: np.ndarray) -> float:
    peak = float(np.abs(w).max())
    return peak / INT8_MAX if peak > 0 else 1.0


def quantize_mlp(model: MLPModel, calibration: np.ndarray) -> QuantizedMLPModel:
    """Integer-only deployment form of a trained perceptron.

    Weights are per-tensor symmetric int8; activations use affine
    quantizers calibrated on the given representative inputs; biases are
    int32 at the matching accumulator scales.
    """
    calibration = np.atleast_2d(np.asarray(calibration, dtype=np.float64))
    if calibration.size == 0:
        raise ValueError("calibration set must be non-empty")
    scaled = model.scale_inputs(calibration)
    in_quant = calibrate_tensor(scaled)
    z1, a1, _ = forward(model.w1, model.b1, model.w2, model.b2, scaled)
    # Hidden activations are post-ReLU, so anchor the range at zero.
    hi = max(float(a1.max()), 1e-12)
    hidden_quant = AffineQuantizer(hi / INT8_LEVELS, INT8_MIN)

    s_w1 = _symmetric_weight_scale(model.w1)
    s_w2 = _symmetric_weight_scale(model.w2)
    w1_q = np.clip(np.round(model.w1 / s_w1), INT8_MIN, INT8_MAX).astype(np.int64)
    w2_q = np.clip(np.round(model.w2 / s_w2), INT8_MIN, INT8_MAX).astype(np.int64)
    b1_q = np.round(model.b1 / (in_quant.scale * s_w1)).astype(np.int64)
    b2_q = np.round(model.b2 / (hidden_quant.scale * s_w2)).astype(np.int64)
    m0, shift = _fixed_point_multiplier(in_quant.scale * s_w1 / hidden_quant.scale)
    return QuantizedMLPModel(
        input_quantizer=in_quant, w1_q=w1_q, b1_q=b1_q,
        hidden_quantizer=hidden_quant, requant1=_Requant(m0, shift),
        w2_q=w2_q, b2_q=b2_q, w1_scale=s_w1, w2_scale=s_w2,
        n_classes=model.n_classes, n_features=model.n_features,
        hyperparameters=dict(model.hyperparameters),
    )


# --------------------------------------------------------------------------
# Reporting


@dataclass
class AgreementReport:
    agreement: float
    n_samples: int
    disagreements: np.ndarray  # (C, C); [i, j] = float said i, quantized said j

    def disagreement_count(self) -> int:
        return int(self.disagreements.sum())


def agreement_report(float_model, quantized_model, X: np.ndarray) -> AgreementReport:
    """Fraction of identical argmax predictions plus a disagreement matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    a = np.argmax(float_model.predict_proba(X), axis=1)
    b = np.argmax(quantized_model.predict_proba(X), axis=1)
    n_classes = float_model.predict_proba(X[:1]).shape[1]
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for i, j in zip(a, b):
        if i != j:
            confusion[i, j] += 1
    agreement = float(np.mean(a == b)) if len(X) else 1.0
    return AgreementReport(agreement, len(X), confusion)
