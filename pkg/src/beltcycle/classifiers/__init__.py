"""Supervised model families trained from scratch on numpy arrays."""

from .trees import Tree, train_tree
from .ensemble import EnsembleModel, train_ensemble
from .bayes import GaussianNBModel, train_gnb
from .mlp import MLPModel, train_mlp
from .grid import (
    HyperGrid,
    default_grid,
    default_params,
    grid_search,
    macro_f1,
    predict,
    stratified_kfold_indices,
    train_family,
)

FAMILIES = ("dt", "rf", "et", "xgb", "gnb", "mlp")

__all__ = [
    "EnsembleModel", "FAMILIES", "GaussianNBModel", "HyperGrid", "MLPModel", "Tree",
    "default_grid", "default_params", "grid_search", "macro_f1", "predict",
    "stratified_kfold_indices", "train_ensemble", "train_family", "train_gnb",
    "train_mlp", "train_tree",
]
