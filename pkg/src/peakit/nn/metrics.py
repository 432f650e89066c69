"""Confusion counts and the two-term accuracy measure."""

from dataclasses import dataclass

import numpy as np

from ..errors import UndefinedDenominator


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_predictions(cls, predicted: np.ndarray, labels: np.ndarray) -> "ConfusionCounts":
        predicted = np.asarray(predicted).astype(bool)
        actual = np.asarray(labels).astype(bool)
        return cls(
            tp=int(np.sum(predicted & actual)),
            fp=int(np.sum(predicted & ~actual)),
            tn=int(np.sum(~predicted & ~actual)),
            fn=int(np.sum(~predicted & actual)),
        )


def accuracy(counts: ConfusionCounts) -> float:
    """[TP/(TP+FP) + TN/(FN+TN)] / 2, exactly as defined for this task."""
    if counts.tp + counts.fp == 0 or counts.fn + counts.tn == 0:
        raise UndefinedDenominator(
            f"tp+fp={counts.tp + counts.fp}, fn+tn={counts.fn + counts.tn}: "
            "one accuracy term divides by zero"
        )
    return (counts.tp / (counts.tp + counts.fp)
            + counts.tn / (counts.fn + counts.tn)) / 2


def balanced_accuracy(counts: ConfusionCounts) -> float:
    """[TP/(TP+FN) + TN/(TN+FP)] / 2, the conventional alternative."""
    if counts.tp + counts.fn == 0 or counts.tn + counts.fp == 0:
        raise UndefinedDenominator(
            f"tp+fn={counts.tp + counts.fn}, tn+fp={counts.tn + counts.fp}: "
            "one class has no samples"
        )
    return (counts.tp / (counts.tp + counts.fn)
            + counts.tn / (counts.tn + counts.fp)) / 2
