"""Self-describing JSON serialization for every trained model variant.

The format is versioned via a top-level tag. Float arrays are stored as
plain JSON numbers (repr round-trips exactly); int8/int32 tensors of
quantized models are base64-encoded little-endian bytes with an explicit
shape. Serialized output is byte-stable: keys are sorted and no volatile
fields (timestamps, hostnames) are written.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .classifiers.bayes import GaussianNBModel
from .classifiers.ensemble import EnsembleModel
from .classifiers.mlp import MLPModel
from .classifiers.trees import Tree
from .quantize import (
    AffineQuantizer,
    QuantizedMLPModel,
    QuantizedTree,
    QuantizedTreeModel,
    _Requant,
)

FORMAT_TAG = "beltcycle-model/1"


def _encode_ints(arr: np.ndarray, dtype: str) -> dict:
    data = arr.astype(dtype).tobytes(order="C")
    return {"dtype": dtype, "shape": list(arr.shape),
            "base64": base64.b64encode(data).decode("ascii")}


def _decode_ints(blob: dict) -> np.ndarray:
    raw = base64.b64decode(blob["base64"])
    arr = np.frombuffer(raw, dtype=blob["dtype"]).reshape(blob["shape"])
    return arr.astype(np.int64)


def _tree_to_dict(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def _tree_from_dict(d: dict, n_features: int) -> Tree:
    return Tree(
        feature=np.array(d["feature"], dtype=np.int64),
        threshold=np.array(d["threshold"], dtype=np.float64),
        left=np.array(d["left"], dtype=np.int64),
        right=np.array(d["right"], dtype=np.int64),
        value=np.array(d["value"], dtype=np.float64),
        n_features=n_features,
    )


def _quantizer_to_dict(q: AffineQuantizer) -> dict:
    return {"scale": q.scale, "zero_point": q.zero_point}


def _quantizer_from_dict(d: dict) -> AffineQuantizer:
    return AffineQuantizer(d["scale"], d["zero_point"])


def model_to_dict(model) -> dict:
    out: dict = {"format": FORMAT_TAG}
    if isinstance(model, EnsembleModel):
        out.update({
            "family": model.kind,
            "hyperparameters": model.hyperparameters,
            "n_classes": model.n_classes,
            "n_features": model.n_features,
            "n_trees": model.n_trees,
            "max_depth": model.max_depth,
            "criterion": model.criterion,
            "learning_rate": model.learning_rate,
            "trees": [_tree_to_dict(t) for t in model.trees],
        })
    elif isinstance(model, GaussianNBModel):
        out.update({
            "family": "gnb",
            "hyperparameters": model.hyperparameters or {},
            "n_classes": model.n_classes,
            "n_features": model.n_features,
            "priors": model.priors.tolist(),
            "means": model.means.tolist(),
            "variances": model.variances.tolist(),
        })
    elif isinstance(model, MLPModel):
        out.update({
            "family": "mlp",
            "hyperparameters": model.hyperparameters,
            "n_classes": model.n_classes,
            "n_features": model.n_features,
            "w1": model.w1.tolist(),
            "b1": model.b1.tolist(),
            "w2": model.w2.tolist(),
            "b2": model.b2.tolist(),
            "feature_low": None if model.feature_low is None else model.feature_low.tolist(),
            "feature_span": None if model.feature_span is None else model.feature_span.tolist(),
        })
    elif isinstance(model, QuantizedTreeModel):
        out.update({
            "family": model.kind,
            "hyperparameters": model.hyperparameters,
            "n_classes": model.n_classes,
            "n_features": model.n_features,
            "n_trees": model.n_trees,
            "learning_rate": model.learning_rate,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": _encode_ints(t.threshold, "int8"),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in model.trees
            ],
            "quantization": {
                "kind": "tree",
                "input_quantizers": [_quantizer_to_dict(q) for q in model.input_quantizers],
                "clamped_thresholds": model.clamped_thresholds,
            },
        })
    elif isinstance(model, QuantizedMLPModel):
        out.update({
            "family": "mlp",
            "hyperparameters": model.hyperparameters,
            "n_classes": model.n_classes,
            "n_features": model.n_features,
            "quantization": {
                "kind": "mlp",
                "input_quantizer": _quantizer_to_dict(model.input_quantizer),
                "hidden_quantizer": _quantizer_to_dict(model.hidden_quantizer),
                "w1": _encode_ints(model.w1_q, "int8"),
                "b1": _encode_ints(model.b1_q, "int32"),
                "w2": _encode_ints(model.w2_q, "int8"),
                "b2": _encode_ints(model.b2_q, "int32"),
                "w1_scale": model.w1_scale,
                "w2_scale": model.w2_scale,
                "requant_m0": model.requant1.m0,
                "requant_shift": model.requant1.shift,
            },
        })
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    return out


def model_from_dict(data: dict):
    if data.get("format") != FORMAT_TAG:
        raise ValueError(f"unsupported model format {data.get('format')!r}")
    family = data["family"]
    quant = data.get("quantization")
    if quant is not None and quant["kind"] == "tree":
        trees = [
            QuantizedTree(
                feature=np.array(t["feature"], dtype=np.int64),
                threshold=_decode_ints(t["threshold"]),
                left=np.array(t["left"], dtype=np.int64),
                right=np.array(t["right"], dtype=np.int64),
                value=np.array(t["value"], dtype=np.float64),
            )
            for t in data["trees"]
        ]
        return QuantizedTreeModel(
            kind=family, trees=trees, n_trees=data["n_trees"],
            n_classes=data["n_classes"], n_features=data["n_features"],
            input_quantizers=[_quantizer_from_dict(q) for q in quant["input_quantizers"]],
            learning_rate=data["learning_rate"],
            clamped_thresholds=quant["clamped_thresholds"],
            hyperparameters=data["hyperparameters"],
        )
    if quant is not None and quant["kind"] == "mlp":
        return QuantizedMLPModel(
            input_quantizer=_quantizer_from_dict(quant["input_quantizer"]),
            w1_q=_decode_ints(quant["w1"]), b1_q=_decode_ints(quant["b1"]),
            hidden_quantizer=_quantizer_from_dict(quant["hidden_quantizer"]),
            requant1=_Requant(quant["requant_m0"], quant["requant_shift"]),
            w2_q=_decode_ints(quant["w2"]), b2_q=_decode_ints(quant["b2"]),
            w1_scale=quant["w1_scale"], w2_scale=quant["w2_scale"],
            n_classes=data["n_classes"], n_features=data["n_features"],
            hyperparameters=data["hyperparameters"],
        )
    if family in ("dt", "rf", "et", "xgb"):
        trees = [_tree_from_dict(t, data["n_features"]) for t in data["trees"]]
        return EnsembleModel(
            kind=family, trees=trees, n_trees=data["n_trees"],
            max_depth=data["max_depth"], criterion=data["criterion"],
            n_classes=data["n_classes"], n_features=data["n_features"],
            learning_rate=data["learning_rate"],
            hyperparameters=data["hyperparameters"],
        )
    if family == "gnb":
        return GaussianNBModel(
            priors=np.array(data["priors"], dtype=np.float64),
            means=np.array(data["means"], dtype=np.float64),
            variances=np.array(data["variances"], dtype=np.float64),
            n_classes=data["n_classes"], n_features=data["n_features"],
            hyperparameters=data["hyperparameters"],
        )
    if family == "mlp":
        low = data["feature_low"]
        span = data["feature_span"]
        return MLPModel(
            w1=np.array(data["w1"], dtype=np.float64),
            b1=np.array(data["b1"], dtype=np.float64),
            w2=np.array(data["w2"], dtype=np.float64),
            b2=np.array(data["b2"], dtype=np.float64),
            feature_low=None if low is None else np.array(low, dtype=np.float64),
            feature_span=None if span is None else np.array(span, dtype=np.float64),
            hyperparameters=data["hyperparameters"],
        )
    raise ValueError(f"unknown model family {family!r}")


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def load_model(path: str | Path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
