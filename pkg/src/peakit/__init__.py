"""Toolkit for perceivable-encoding-artifact annotation, patch datasets,
per-artifact CNN classifiers, and pattern/intensity analysis of compressed
video sequences."""

__version__ = "0.1.0"

from . import (  # noqa: F401
    analysis,
    annotation,
    dataset_store,
    errors,
    nn,
    patch_pipeline,
    pea_models,
    pea_types,
    synthetic,
    video_io,
)
from .pea_types import PeaType  # noqa: F401
