import os

# Keep BLAS reductions deterministic run-to-run before numpy loads anywhere.
os.environ.setdefault("OMP_NUM_THREADS", "4")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "4")

import numpy as np
import pytest

from peakit.video_io import FrameBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_frame(rng, width, height):
    return FrameBuffer(
        rng.integers(0, 256, size=(height, width), dtype=np.uint8),
        rng.integers(0, 256, size=(height // 2, width // 2), dtype=np.uint8),
        rng.integers(0, 256, size=(height // 2, width // 2), dtype=np.uint8),
    )


@pytest.fixture
def frame_factory():
    return random_frame
