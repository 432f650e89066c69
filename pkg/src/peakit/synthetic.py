"""Synthetic fixtures: textured patches with injected artifacts, fixture
YUV sequences, and stub classifiers for exercising the analysis stage.

The injected artifacts are deliberately simple. Blocking adds independent
DC offsets to the 8x8 coding-block lattice; blurring low-passes a detailed
texture until the fine structure is gone; flickering oscillates frame
brightness across a cuboid.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np

from .patch_pipeline import split
from .pea_models import PatchArrays, TaskData
from .pea_types import TEMPORAL_SPAN, PeaType
from .video_io import FrameBuffer, SequenceMeta, write_sequence, write_sidecar

BLOCK = 8  # coding-block lattice used for blocking injection


def smooth_field(rng: np.random.Generator, height: int, width: int,
                 cell: int = 8, lo: float = 40.0, hi: float = 215.0) -> np.ndarray:
    """Smooth random field: coarse uniform grid, bilinearly interpolated."""
    gh = height // cell + 2
    gw = width // cell + 2
    coarse = rng.uniform(lo, hi, size=(gh, gw))
    ys = np.linspace(0, gh - 1.001, height)
    xs = np.linspace(0, gw - 1.001, width)
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    p00 = coarse[np.ix_(y0, x0)]
    p01 = coarse[np.ix_(y0, x0 + 1)]
    p10 = coarse[np.ix_(y0 + 1, x0)]
    p11 = coarse[np.ix_(y0 + 1, x0 + 1)]
    return (1 - wy) * ((1 - wx) * p00 + wx * p01) + wy * ((1 - wx) * p10 + wx * p11)


def _box_blur(plane: np.ndarray, passes: int = 3) -> np.ndarray:
    """Repeated 3x3 box blur with edge clamping."""
    out = plane.astype(np.float64)
    for _ in range(passes):
        padded = np.pad(out, 1, mode="edge")
        acc = np.zeros_like(out)
        for dy in (0, 1, 2):
            for dx in (0, 1, 2):
                acc += padded[dy:dy + out.shape[0], dx:dx + out.shape[1]]
        out = acc / 9.0
    return out


def _clean_luma(rng: np.random.Generator, size: int) -> np.ndarray:
    """Textured luma: smooth base plus fine detail that blurring destroys."""
    base = smooth_field(rng, size, size, cell=8)
    detail = rng.normal(0.0, 7.0, size=(size, size))
    return base + detail


def _chroma_pair(rng: np.random.Generator, size: int):
    u = smooth_field(rng, size // 2, size // 2, cell=4, lo=96, hi=160)
    v = smooth_field(rng, size // 2, size // 2, cell=4, lo=96, hi=160)
    return u, v


def _to_u8(plane: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(plane), 0, 255).astype(np.uint8)


def _inject_blocking(luma: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Add an independent DC offset per 8x8 block: discontinuities at the
    block lattice."""
    size = luma.shape[0]
    nb = size // BLOCK
    offsets = rng.uniform(10.0, 26.0, size=(nb, nb)) * rng.choice([-1.0, 1.0], size=(nb, nb))
    return luma + np.kron(offsets, np.ones((BLOCK, BLOCK)))


def synthetic_patches(kind: str, n: int, size: int, seed: int) -> PatchArrays:
    """Generate n patches of one kind: clean, blocking, blurring or
    flickering. Flickering patches are 10-frame cuboids."""
    rng = np.random.default_rng(seed)
    temporal = kind in ("flickering", "steady")
    n_frames = TEMPORAL_SPAN if temporal else 1
    y = np.empty((n, n_frames, size, size), dtype=np.uint8)
    u = np.empty((n, n_frames, size // 2, size // 2), dtype=np.uint8)
    v = np.empty((n, n_frames, size // 2, size // 2), dtype=np.uint8)
    for i in range(n):
        base = _clean_luma(rng, size)
        cu, cv = _chroma_pair(rng, size)
        if kind == "clean":
            frames = [base] * n_frames
        elif kind in ("brightness", "dim"):
            # tight base so the +60 offset makes mean luma linearly separable
            tight = smooth_field(rng, size, size, cell=8, lo=90, hi=150)
            tight = tight + rng.normal(0.0, 5.0, size=(size, size))
            frames = [tight + (60.0 if kind == "brightness" else 0.0)] * n_frames
        elif kind == "blocking":
            frames = [_inject_blocking(base, rng)] * n_frames
        elif kind == "blurring":
            frames = [_box_blur(base)] * n_frames
        elif kind == "flickering":
            amp = rng.uniform(10.0, 25.0)
            frames = [base + amp * (1 if f % 2 else -1) for f in range(n_frames)]
        elif kind == "steady":
            drift = rng.normal(0.0, 1.0)
            frames = [base + drift * f for f in range(n_frames)]
        else:
            raise ValueError(f"unknown synthetic kind {kind!r}")
        for f, plane in enumerate(frames):
            y[i, f] = _to_u8(plane)
            u[i, f] = _to_u8(cu)
            v[i, f] = _to_u8(cv)
    labels = np.full(n, 0 if kind in ("clean", "steady", "dim") else 1, dtype=np.int64)
    ids = [f"{kind}:{seed}:{i}" for i in range(n)]
    return PatchArrays(y=y, u=u, v=v, labels=labels, ids=ids)


_NEGATIVE_KIND = {
    "blocking": "clean",
    "blurring": "clean",
    "brightness": "dim",
    "flickering": "steady",
}


def synthetic_task(kind: str, n_per_class: int, size: int, seed: int,
                   train_fraction: float = 0.75) -> TaskData:
    """Balanced binary task (artifact vs clean) with a stratified split."""
    pos = synthetic_patches(kind, n_per_class, size, seed)
    neg = synthetic_patches(_NEGATIVE_KIND[kind], n_per_class, size, seed + 1)
    y = np.concatenate([pos.y, neg.y])
    u = np.concatenate([pos.u, neg.u])
    v = np.concatenate([pos.v, neg.v])
    labels = np.concatenate([pos.labels, neg.labels])
    ids = pos.ids + neg.ids
    assignment = split(list(zip(ids, labels.tolist())), seed=seed,
                       train_fraction=train_fraction)
    train_idx = np.array([i for i, rid in enumerate(ids) if assignment[rid] == "train"])
    test_idx = np.array([i for i, rid in enumerate(ids) if assignment[rid] == "test"])

    def take(idx):
        return PatchArrays(
            y=y[idx], u=u[idx], v=v[idx], labels=labels[idx],
            ids=[ids[i] for i in idx],
        )

    return TaskData(train=take(train_idx), test=take(test_idx))


# -- fixture sequences --------------------------------------------------------


def synthetic_frames(width: int, height: int, n_frames: int, seed: int) -> List[FrameBuffer]:
    """Temporally coherent random frames (smooth content plus drift)."""
    rng = np.random.default_rng(seed)
    base = smooth_field(rng, height, width, cell=16)
    cu = smooth_field(rng, height // 2, width // 2, cell=8, lo=96, hi=160)
    cv = smooth_field(rng, height // 2, width // 2, cell=8, lo=96, hi=160)
    frames = []
    for f in range(n_frames):
        drift = smooth_field(rng, height, width, cell=32, lo=-6, hi=6)
        frames.append(FrameBuffer(_to_u8(base + drift), _to_u8(cu), _to_u8(cv)))
    return frames


def gradient_frames(width: int, height: int, n_frames: int) -> List[FrameBuffer]:
    """Y increases left to right (0..255); constant across frames."""
    y = np.tile(np.linspace(0, 255, width, dtype=np.float64), (height, 1))
    u = np.full((height // 2, width // 2), 128, dtype=np.uint8)
    frame = FrameBuffer(_to_u8(y), u, u.copy())
    return [frame] * n_frames


def write_fixture_sequence(path, meta: SequenceMeta, frames: Sequence[FrameBuffer]) -> SequenceMeta:
    """Write frames plus the JSON sidecar; returns meta with the frame count."""
    write_sequence(path, frames)
    meta = SequenceMeta(
        name=meta.name, width=meta.width, height=meta.height,
        frame_rate=meta.frame_rate, frame_count=len(frames),
        class_label=meta.class_label, qp=meta.qp,
        coding_structure=meta.coding_structure, reference=meta.reference,
    )
    write_sidecar(path, meta)
    return meta


# -- stub classifiers ---------------------------------------------------------


@dataclass
class StubClassifier:
    """Rule-driven stand-in for a trained classifier.

    ``rule`` maps one payload (patch, or list of patches when temporal) to a
    bool. Used to exercise the analysis stage without training.
    """

    pea_type: PeaType
    rule: Callable[[object], bool]
    window_size: int = 32
    temporal: bool = False

    @property
    def n_frames(self) -> int:
        return TEMPORAL_SPAN if self.temporal else 1

    def predict_payloads(self, payloads: Sequence) -> np.ndarray:
        return np.array([bool(self.rule(p)) for p in payloads], dtype=bool)

    def predict_payload(self, payload):
        hit = bool(self.rule(payload))
        return (1.0 if hit else 0.0), hit


def constant_stub(pea_type: PeaType, value: bool, window_size: int = 32) -> StubClassifier:
    return StubClassifier(
        pea_type=pea_type,
        rule=lambda _p: value,
        window_size=window_size,
        temporal=pea_type.is_temporal,
    )


def stub_bank(value: bool = False, window_size: int = 32) -> Dict[PeaType, StubClassifier]:
    """A full six-classifier bank of constant stubs."""
    return {t: constant_stub(t, value, window_size) for t in PeaType}


def luma_threshold_stub(pea_type: PeaType, threshold: float,
                        window_size: int = 32) -> StubClassifier:
    """Fires when the mean luma of the (first frame of the) payload is below
    the threshold; with a left-to-right gradient fixture this selects the
    left fraction of grid cells."""
    def rule(payload):
        first = payload[0] if isinstance(payload, (list, tuple)) else payload
        return float(first.y.mean()) < threshold

    return StubClassifier(
        pea_type=pea_type, rule=rule, window_size=window_size,
        temporal=pea_type.is_temporal,
    )


def threshold_bank(threshold: float, window_size: int = 32) -> Dict[PeaType, StubClassifier]:
    """Bank whose firing set grows with the threshold: monotone in any
    quantity the threshold tracks (used for the Qp monotonicity diagnostic)."""
    return {t: luma_threshold_stub(t, threshold, window_size) for t in PeaType}
