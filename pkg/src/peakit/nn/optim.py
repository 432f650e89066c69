"""SGD with momentum and weight decay, plus the training hyperparameters."""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .layers import Parameter


@dataclass
class TrainConfig:
    """Optimizer schedule and bookkeeping.

    The defaults are desk scale; ``paper_mode`` switches to mini-batches of
    256 and requires exactly three learning-rate drops of factor 10.
    """

    batch_size: int = 64
    momentum: float = 0.9
    weight_decay: float = 1e-4
    initial_lr: float = 0.1
    lr_drop_epochs: Tuple[int, ...] = (20, 30, 36)
    lr_drop_factor: float = 10.0
    epochs: int = 40
    seed: int = 0
    paper_mode: bool = False

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.paper_mode:
            if len(self.lr_drop_epochs) != 3:
                raise ValueError("paper mode requires exactly three lr drops")
            if self.batch_size != 256:
                raise ValueError("paper mode requires batch_size 256")
        if tuple(sorted(self.lr_drop_epochs)) != tuple(self.lr_drop_epochs):
            raise ValueError("lr_drop_epochs must be sorted")

    def lr_at(self, epoch: int) -> float:
        drops = sum(1 for e in self.lr_drop_epochs if epoch >= e)
        return self.initial_lr / (self.lr_drop_factor ** drops)


def sgd_step(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray,
             lr: float, momentum: float, weight_decay: float) -> None:
    """In-place update: v <- m*v + grad + wd*param; param <- param - lr*v."""
    velocity *= momentum
    velocity += grad
    if weight_decay:
        velocity += weight_decay * param
    param -= lr * velocity


class SGD:
    def __init__(self, params: Sequence[Parameter], lr: float,
                 momentum: float = 0.9, weight_decay: float = 1e-4):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocities = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        for p, v in zip(self.params, self.velocities):
            sgd_step(p.value, p.grad, v, self.lr, self.momentum, self.weight_decay)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
