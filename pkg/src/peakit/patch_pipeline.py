"""Mask-to-patch labeling, negative sampling, dataset split and augmentation.

A sliding window over a circled-region mask is positive when at least half
of its pixels are inside the region; temporal cuboids apply the same rule to
the union of their 10 frame masks. Negatives come in two kinds: uncircled
windows of the compressed frame, and randomly placed windows of the
uncompressed reference (default ratio 1:2).
"""

import enum
import hashlib
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .annotation import RegionMask, union_masks
from .dataset_store import QP_REFERENCE, PatchRecord
from .errors import (
    DimensionMismatch,
    InsufficientReferenceArea,
    WrongSpanLength,
)
from .pea_types import TEMPORAL_SPAN, PeaType
from .video_io import PatchPayload, SequenceReader, crop

WINDOW_SIZES = (32, 72)


class Source(enum.Enum):
    COMPRESSED_CIRCLED = "compressed_circled"
    COMPRESSED_UNCIRCLED = "compressed_uncircled"
    REFERENCE = "reference"


@dataclass(frozen=True)
class LabeledWindow:
    """One labeled sliding-window placement (spatial) or cuboid (temporal)."""

    x: int
    y: int
    size: int
    frame: int  # frame index, or start frame for a 10-frame cuboid
    pea_type: PeaType
    label: int
    source: Source

    def __post_init__(self):
        if self.size not in WINDOW_SIZES:
            raise ValueError(f"window size must be one of {WINDOW_SIZES}, got {self.size}")
        if self.size != self.pea_type.window_size:
            raise ValueError(
                f"{self.pea_type.wire_name} windows are {self.pea_type.window_size} px, "
                f"got {self.size}"
            )
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.label == 1 and self.source is not Source.COMPRESSED_CIRCLED:
            raise ValueError("positive windows must come from circled compressed frames")


def _window_grid(width: int, height: int, size: int, stride: int) -> Tuple[np.ndarray, np.ndarray]:
    xs = np.arange(0, width - size + 1, stride, dtype=np.int64)
    ys = np.arange(0, height - size + 1, stride, dtype=np.int64)
    return xs, ys


def _window_sums(bits: np.ndarray, size: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Pixel counts of each (y, x) window via a summed-area table."""
    sat = np.zeros((bits.shape[0] + 1, bits.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(bits, axis=0), axis=1, out=sat[1:, 1:])
    y0 = ys[:, None]
    x0 = xs[None, :]
    return (
        sat[y0 + size, x0 + size]
        - sat[y0, x0 + size]
        - sat[y0 + size, x0]
        + sat[y0, x0]
    )


def label_spatial(
    mask: RegionMask,
    size: int,
    stride: Optional[int] = None,
    *,
    pea_type: PeaType,
    frame: int = 0,
) -> List[LabeledWindow]:
    """Label every in-frame window on the stride grid against the mask.

    A window is positive iff at least half of its pixels are set
    (ones >= size^2 / 2); every other grid window becomes a
    compressed-uncircled negative. Windows that would cross the frame
    border are dropped.
    """
    if stride is None:
        stride = size
    if stride <= 0:
        raise ValueError(f"stride must be > 0, got {stride}")
    xs, ys = _window_grid(mask.width, mask.height, size, stride)
    if len(xs) == 0 or len(ys) == 0:
        return []
    sums = _window_sums(mask.bits, size, xs, ys)
    threshold = size * size / 2
    out = []
    for yi, y in enumerate(ys):
        for xi, x in enumerate(xs):
            positive = sums[yi, xi] >= threshold
            out.append(LabeledWindow(
                x=int(x), y=int(y), size=size, frame=frame, pea_type=pea_type,
                label=1 if positive else 0,
                source=Source.COMPRESSED_CIRCLED if positive else Source.COMPRESSED_UNCIRCLED,
            ))
    return out


def label_temporal(
    masks: Sequence[RegionMask],
    size: int,
    stride: Optional[int] = None,
    *,
    pea_type: PeaType,
    start_frame: int = 0,
) -> List[LabeledWindow]:
    """Label 10-frame cuboids: the spatial rule applied to the mask union."""
    if len(masks) != TEMPORAL_SPAN:
        raise WrongSpanLength(f"need exactly {TEMPORAL_SPAN} masks, got {len(masks)}")
    shape = masks[0].bits.shape
    for m in masks[1:]:
        if m.bits.shape != shape:
            raise DimensionMismatch("temporal masks differ in dimensions")
    merged = union_masks(list(masks))
    return label_spatial(merged, size, stride, pea_type=pea_type, frame=start_frame)


def sample_negatives(
    compressed_negatives: Sequence[LabeledWindow],
    *,
    width: int,
    height: int,
    frame_indices: Sequence[int],
    seed: int,
    ratio: Tuple[int, int] = (1, 2),
) -> List[LabeledWindow]:
    """Draw reference-frame negatives to the configured ratio.

    ``ratio`` is compressed-uncircled : reference, so the default (1, 2)
    emits two reference windows per compressed negative. Placements are
    uniform over even-aligned in-frame positions and the given frames,
    without replacement; deterministic for a fixed seed. When the target is
    not achievable (fewer placements exist), every placement is emitted.
    """
    a, b = ratio
    if a < 1 or b < 0:
        raise ValueError(f"ratio must be (>=1, >=0), got {ratio}")
    if not compressed_negatives:
        return []
    sizes = {w.size for w in compressed_negatives}
    types = {w.pea_type for w in compressed_negatives}
    if len(sizes) != 1 or len(types) != 1:
        raise ValueError("compressed negatives must share one size and pea_type")
    size = sizes.pop()
    pea_type = types.pop()
    target = len(compressed_negatives) * b // a
    if target == 0:
        return []

    nx = (width - size) // 2 + 1 if width >= size else 0
    ny = (height - size) // 2 + 1 if height >= size else 0
    total = nx * ny * len(frame_indices)
    if total == 0:
        raise InsufficientReferenceArea(
            f"no {size}x{size} window fits a {width}x{height} frame "
            f"({len(frame_indices)} frame(s) offered)"
        )
    rng = np.random.default_rng(seed)
    count = min(target, total)
    if total <= 4_000_000:
        picks = rng.permutation(total)[:count]
    else:
        chosen: List[int] = []
        seen = set()
        while len(chosen) < count:
            for idx in rng.integers(0, total, size=2 * (count - len(chosen))):
                if idx not in seen:
                    seen.add(int(idx))
                    chosen.append(int(idx))
                    if len(chosen) == count:
                        break
        picks = np.array(chosen)
    out = []
    frames = np.asarray(list(frame_indices))
    for idx in picks:
        fi, rem = divmod(int(idx), nx * ny)
        yi, xi = divmod(rem, nx)
        out.append(LabeledWindow(
            x=2 * xi, y=2 * yi, size=size, frame=int(frames[fi]),
            pea_type=pea_type, label=0, source=Source.REFERENCE,
        ))
    return out


# -- train/test split ---------------------------------------------------------


@dataclass(frozen=True)
class SplitAssignment:
    """Record id -> split tag, stratified by label at the train fraction."""

    assignment: Dict[str, str]
    train_fraction: float
    seed: int

    def __getitem__(self, record_id: str) -> str:
        return self.assignment[record_id]

    @property
    def train_ids(self) -> List[str]:
        return [k for k, v in self.assignment.items() if v == "train"]

    @property
    def test_ids(self) -> List[str]:
        return [k for k, v in self.assignment.items() if v == "test"]


def _split_hash(seed: int, record_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{record_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def split(
    records: Sequence[Tuple[str, int]],
    seed: int,
    train_fraction: float = 0.75,
) -> SplitAssignment:
    """Assign (record_id, label) pairs to train/test, stratified by label.

    Test counts are exact: floor(n * (1 - train_fraction)) overall, spread
    over the labels by largest remainder, so each label splits at the train
    fraction within one record. Assignment depends only on the id set, the
    labels and the seed; input order is irrelevant.
    """
    if len(records) < 4:
        raise ValueError(f"need at least 4 records to split, got {len(records)}")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    ids = [rid for rid, _ in records]
    if len(set(ids)) != len(ids):
        raise ValueError("record ids must be unique")

    by_label: Dict[int, List[str]] = {}
    for rid, label in records:
        by_label.setdefault(label, []).append(rid)

    test_total = math.floor(len(records) * (1.0 - train_fraction))
    quotas = {lab: len(rids) * (1.0 - train_fraction) for lab, rids in by_label.items()}
    base = {lab: math.floor(q) for lab, q in quotas.items()}
    extras = test_total - sum(base.values())
    order = sorted(by_label, key=lambda lab: (-(quotas[lab] - base[lab]), lab))
    counts = dict(base)
    for lab in order[:extras]:
        counts[lab] += 1

    assignment: Dict[str, str] = {}
    for lab, rids in by_label.items():
        ranked = sorted(rids, key=lambda rid: (_split_hash(seed, rid), rid))
        k = counts[lab]
        for rid in ranked[:k]:
            assignment[rid] = "test"
        for rid in ranked[k:]:
            assignment[rid] = "train"
    return SplitAssignment(assignment=assignment, train_fraction=train_fraction, seed=seed)


# -- augmentation -------------------------------------------------------------

FILL_MODES = ("nearest", "reflect", "constant")


@dataclass(frozen=True)
class AugmentConfig:
    """Random affine augmentation ranges (all ranges are half-widths)."""

    rotation_range: float = 15.0    # degrees
    width_shift: float = 0.10       # fraction of patch width
    height_shift: float = 0.10      # fraction of patch height
    shear_range: float = 10.0       # degrees
    zoom_range: float = 0.10        # fraction; zoom drawn in [1-z, 1+z]
    horizontal_flip: bool = True
    fill_mode: str = "nearest"
    cval: float = 0.0

    def __post_init__(self):
        for name in ("rotation_range", "width_shift", "height_shift",
                     "shear_range", "zoom_range"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.zoom_range < 1:
            raise ValueError(f"zoom_range must be < 1, got {self.zoom_range}")
        if self.fill_mode not in FILL_MODES:
            raise ValueError(f"fill_mode must be one of {FILL_MODES}")


IDENTITY_AUGMENT = AugmentConfig(
    rotation_range=0.0, width_shift=0.0, height_shift=0.0,
    shear_range=0.0, zoom_range=0.0, horizontal_flip=False,
)


@dataclass(frozen=True)
class AffineParams:
    """One concrete transform draw. rotation=90 turns [[1,2],[3,4]] into
    [[2,4],[1,3]] (quarter turn about the patch center)."""

    rotation: float = 0.0   # degrees
    shift_x: float = 0.0    # pixels
    shift_y: float = 0.0
    shear: float = 0.0      # degrees
    zoom: float = 1.0
    flip: bool = False


def draw_affine_params(cfg: AugmentConfig, size: int, rng: np.random.Generator) -> AffineParams:
    rotation = float(rng.uniform(-cfg.rotation_range, cfg.rotation_range)) if cfg.rotation_range else 0.0
    shift_x = float(rng.uniform(-cfg.width_shift, cfg.width_shift) * size) if cfg.width_shift else 0.0
    shift_y = float(rng.uniform(-cfg.height_shift, cfg.height_shift) * size) if cfg.height_shift else 0.0
    shear = float(rng.uniform(-cfg.shear_range, cfg.shear_range)) if cfg.shear_range else 0.0
    zoom = float(rng.uniform(1.0 - cfg.zoom_range, 1.0 + cfg.zoom_range)) if cfg.zoom_range else 1.0
    flip = bool(cfg.horizontal_flip and rng.random() < 0.5)
    return AffineParams(rotation, shift_x, shift_y, shear, zoom, flip)


def _inverse_matrix(params: AffineParams) -> np.ndarray:
    """2x2 matrix mapping centered output coords to centered source coords."""
    theta = math.radians(params.rotation)
    rot = np.array([[math.cos(theta), -math.sin(theta)],
                    [math.sin(theta), math.cos(theta)]])
    shear = np.array([[1.0, -math.tan(math.radians(params.shear))],
                      [0.0, 1.0]])
    zoom = np.array([[1.0 / params.zoom, 0.0], [0.0, 1.0 / params.zoom]])
    flip = np.array([[-1.0, 0.0], [0.0, 1.0]]) if params.flip else np.eye(2)
    if params.rotation == 0 and params.shear == 0 and params.zoom == 1 and not params.flip:
        return np.eye(2)  # exact identity, no cos/tan round-off
    return flip @ zoom @ shear @ rot


def _sample_bilinear(plane: np.ndarray, sx: np.ndarray, sy: np.ndarray,
                     fill_mode: str, cval: float) -> np.ndarray:
    h, w = plane.shape
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    wx = sx - x0
    wy = sy - y0

    def gather(yy, xx):
        if fill_mode == "nearest":
            yy = np.clip(yy, 0, h - 1)
            xx = np.clip(xx, 0, w - 1)
            return plane[yy, xx].astype(np.float64)
        if fill_mode == "reflect":
            yy = np.mod(yy, 2 * h)
            yy = np.where(yy >= h, 2 * h - 1 - yy, yy)
            xx = np.mod(xx, 2 * w)
            xx = np.where(xx >= w, 2 * w - 1 - xx, xx)
            return plane[yy, xx].astype(np.float64)
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        vals = plane[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)].astype(np.float64)
        return np.where(inside, vals, cval)

    p00 = gather(y0, x0)
    p01 = gather(y0, x0 + 1)
    p10 = gather(y0 + 1, x0)
    p11 = gather(y0 + 1, x0 + 1)
    return (
        (1 - wy) * ((1 - wx) * p00 + wx * p01)
        + wy * ((1 - wx) * p10 + wx * p11)
    )


def _transform_plane(plane: np.ndarray, params: AffineParams,
                     fill_mode: str, cval: float) -> np.ndarray:
    h, w = plane.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    xs = np.arange(w, dtype=np.float64) - cx - params.shift_x
    ys = np.arange(h, dtype=np.float64) - cy - params.shift_y
    gx, gy = np.meshgrid(xs, ys)
    m = _inverse_matrix(params)
    sx = m[0, 0] * gx + m[0, 1] * gy + cx
    sy = m[1, 0] * gx + m[1, 1] * gy + cy
    out = _sample_bilinear(plane, sx, sy, fill_mode, cval)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def apply_affine(patch: PatchPayload, params: AffineParams,
                 fill_mode: str = "nearest", cval: float = 0.0) -> PatchPayload:
    """Apply one concrete transform to a 4:2:0 patch.

    Chroma is nearest-upsampled to full resolution, transformed with the
    same full-resolution parameters, then re-decimated, so all channels move
    coherently and the identity transform is bit-exact.
    """
    if patch.width != patch.height:
        raise ValueError(f"augmentation expects square patches, got {patch.width}x{patch.height}")
    y = _transform_plane(patch.y, params, fill_mode, cval)
    u_full = patch.u.repeat(2, axis=0).repeat(2, axis=1)
    v_full = patch.v.repeat(2, axis=0).repeat(2, axis=1)
    u = _transform_plane(u_full, params, fill_mode, cval)[::2, ::2]
    v = _transform_plane(v_full, params, fill_mode, cval)[::2, ::2]
    return PatchPayload(y, u, v)


def augment(patch: PatchPayload, cfg: AugmentConfig, seed: int) -> PatchPayload:
    """Draw one random transform from the config and apply it."""
    rng = np.random.default_rng(seed)
    params = draw_affine_params(cfg, patch.width, rng)
    return apply_affine(patch, params, cfg.fill_mode, cfg.cval)


def augment_cuboid(frames: Sequence[PatchPayload], cfg: AugmentConfig, seed: int) -> List[PatchPayload]:
    """Augment a temporal cuboid with one transform shared by all frames."""
    if not frames:
        return []
    rng = np.random.default_rng(seed)
    params = draw_affine_params(cfg, frames[0].width, rng)
    return [apply_affine(f, params, cfg.fill_mode, cfg.cval) for f in frames]


# -- record generation glue ---------------------------------------------------


def window_payload(
    reader: SequenceReader,
    window: LabeledWindow,
    n_frames: int,
) -> bytes:
    """Extract the raw payload bytes for a window (frame-major for cuboids)."""
    chunks = []
    for i in range(n_frames):
        frame = reader.read_frame(window.frame + i)
        chunks.append(crop(frame, window.x, window.y, window.size, window.size).to_bytes())
    return b"".join(chunks)


def record_for_window(
    window: LabeledWindow,
    compressed: SequenceReader,
    reference: Optional[SequenceReader],
    qp: int,
    sequence_name: str,
) -> PatchRecord:
    """Build the PatchRecord for a labeled window, reading the right source."""
    n_frames = window.pea_type.n_frames
    if window.source is Source.REFERENCE:
        if reference is None:
            raise InsufficientReferenceArea("reference window without a reference reader")
        payload = window_payload(reference, window, n_frames)
        record_qp = QP_REFERENCE
    else:
        payload = window_payload(compressed, window, n_frames)
        record_qp = qp
    return PatchRecord(
        pea_type=window.pea_type, label=window.label, size=window.size,
        n_frames=n_frames, qp=record_qp, sequence=sequence_name,
        frame_number=window.frame, x=window.x, y=window.y, payload=payload,
    )
