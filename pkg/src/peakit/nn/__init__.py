"""Minimal deterministic neural-network engine (numpy, CPU only)."""

from .gradcheck import grad_check
from .layers import (
    BatchNorm2d,
    Conv2d,
    Flatten,
    FullyConnected,
    GlobalAvgPool,
    Layer,
    MaxPool2x2,
    Parameter,
    ReLU,
    Residual,
    Softmax,
)
from .loss import softmax, softmax_cross_entropy
from .metrics import ConfusionCounts, accuracy, balanced_accuracy
from .model import (
    Sequential,
    load_model,
    load_model_bytes,
    model_from_spec,
    save_model,
    save_model_bytes,
    set_debug_checks,
)
from .optim import SGD, TrainConfig, sgd_step

__all__ = [
    "BatchNorm2d", "Conv2d", "ConfusionCounts", "Flatten", "FullyConnected",
    "GlobalAvgPool", "Layer", "MaxPool2x2", "Parameter", "ReLU", "Residual",
    "SGD", "Sequential", "Softmax", "TrainConfig", "accuracy",
    "balanced_accuracy", "grad_check", "load_model", "load_model_bytes",
    "model_from_spec", "save_model", "save_model_bytes", "set_debug_checks",
    "sgd_step", "softmax", "softmax_cross_entropy",
]
