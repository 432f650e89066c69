"""Raw planar YUV 4:2:0 sequence access.

Files are frame-sequential, Y then U then V per frame, row-major, headerless,
8-bit samples. Metadata comes from an explicit :class:`SequenceMeta`, a JSON
sidecar next to the file, or (fallback) a ``name_WxH_fps.yuv`` filename.
"""

import json
import os
import re
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    FileMissing,
    IndexOutOfRange,
    OddGeometry,
    OutOfBounds,
    SizeMismatch,
    UnsupportedFormat,
)

CODING_STRUCTURES = ("AllIntra", "RandomAccess", "LowDelay", "LowDelayP")

_FILENAME_RE = re.compile(r"^(?P<name>.+)_(?P<w>\d+)x(?P<h>\d+)_(?P<fps>\d+(?:\.\d+)?)$")


@dataclass(frozen=True)
class SequenceMeta:
    """Descriptive metadata for one raw video sequence.

    ``qp`` is absent (None) for reference sequences. ``frame_count`` may be
    None, in which case it is derived from the file size on open.
    """

    name: str
    width: int
    height: int
    frame_rate: float = 30.0
    frame_count: Optional[int] = None
    class_label: Optional[str] = None
    qp: Optional[int] = None
    coding_structure: Optional[str] = None
    reference: Optional[str] = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"non-positive dimensions {self.width}x{self.height}")
        if self.width % 2 or self.height % 2:
            raise OddGeometry(
                f"4:2:0 requires even dimensions, got {self.width}x{self.height}"
            )
        if self.frame_count is not None and self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")
        if self.qp is not None and not 0 <= self.qp <= 51:
            raise ValueError(f"qp {self.qp} outside 0..51")
        if self.coding_structure is not None and self.coding_structure not in CODING_STRUCTURES:
            raise ValueError(
                f"coding_structure {self.coding_structure!r} not in {CODING_STRUCTURES}"
            )

    @property
    def frame_bytes(self) -> int:
        return self.width * self.height * 3 // 2

    def to_json(self) -> str:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SequenceMeta":
        d = json.loads(text)
        bit_depth = d.pop("bit_depth", 8)
        if bit_depth != 8:
            raise UnsupportedFormat(f"only 8-bit input is supported, sidecar says {bit_depth}")
        return cls(**d)


def parse_sequence_filename(path) -> Optional[SequenceMeta]:
    """Parse ``name_WxH_fps.yuv`` naming; returns None when it does not match."""
    m = _FILENAME_RE.match(Path(path).stem)
    if not m:
        return None
    return SequenceMeta(
        name=m.group("name"),
        width=int(m.group("w")),
        height=int(m.group("h")),
        frame_rate=float(m.group("fps")),
    )


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def load_sidecar(path) -> Optional[SequenceMeta]:
    sc = sidecar_path(path)
    if not sc.exists():
        return None
    return SequenceMeta.from_json(sc.read_text("utf-8"))


def write_sidecar(path, meta: SequenceMeta) -> Path:
    sc = sidecar_path(path)
    sc.write_text(meta.to_json() + "\n", "utf-8")
    return sc


class _Planar:
    """Planar 4:2:0 pixel box: full-resolution Y, half-resolution U and V."""

    __slots__ = ("y", "u", "v")

    def __init__(self, y: np.ndarray, u: np.ndarray, v: np.ndarray):
        y = np.ascontiguousarray(y, dtype=np.uint8)
        u = np.ascontiguousarray(u, dtype=np.uint8)
        v = np.ascontiguousarray(v, dtype=np.uint8)
        h, w = y.shape
        if u.shape != (h // 2, w // 2) or v.shape != (h // 2, w // 2):
            raise SizeMismatch(
                f"chroma planes {u.shape}/{v.shape} do not match 4:2:0 layout for Y {y.shape}"
            )
        self.y, self.u, self.v = y, u, v

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]

    def to_bytes(self) -> bytes:
        return self.y.tobytes() + self.u.tobytes() + self.v.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, width: int, height: int):
        expected = width * height * 3 // 2
        if len(data) != expected:
            raise SizeMismatch(f"got {len(data)} bytes, expected {expected}")
        raw = np.frombuffer(data, dtype=np.uint8)
        ys = width * height
        cs = ys // 4
        y = raw[:ys].reshape(height, width)
        u = raw[ys:ys + cs].reshape(height // 2, width // 2)
        v = raw[ys + cs:].reshape(height // 2, width // 2)
        return cls(y, u, v)

    def __eq__(self, other):
        return (
            isinstance(other, _Planar)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
        )


class FrameBuffer(_Planar):
    """One decoded frame."""


class PatchPayload(_Planar):
    """A cropped sub-rectangle of a frame (even geometry, chroma-aligned)."""


class SequenceReader:
    """Random access over the frames of one raw YUV file.

    Reads go through ``os.pread`` so concurrent reads from multiple threads
    are safe; no seek state is shared.
    """

    def __init__(self, path, meta: SequenceMeta):
        self.path = Path(path)
        if not self.path.is_file():
            raise FileMissing(f"no such sequence file: {self.path}")
        self.meta = meta
        file_size = self.path.stat().st_size
        fb = meta.frame_bytes
        if file_size == 0 or file_size % fb:
            raise SizeMismatch(
                f"{self.path}: size {file_size} is not a positive multiple of the "
                f"{meta.width}x{meta.height} frame size {fb}"
            )
        self.frame_count = file_size // fb
        if meta.frame_count is not None and meta.frame_count != self.frame_count:
            raise SizeMismatch(
                f"{self.path}: metadata says {meta.frame_count} frames, "
                f"file holds {self.frame_count}"
            )
        self._fd = os.open(self.path, os.O_RDONLY)

    def read_frame(self, index: int) -> FrameBuffer:
        if not 0 <= index < self.frame_count:
            raise IndexOutOfRange(
                f"frame {index} outside [0, {self.frame_count}) in {self.path.name}"
            )
        fb = self.meta.frame_bytes
        data = os.pread(self._fd, fb, index * fb)
        if len(data) != fb:
            raise SizeMismatch(f"short read at frame {index} of {self.path}")
        return FrameBuffer.from_bytes(data, self.meta.width, self.meta.height)

    def read_frames(self, start: int, count: int) -> list:
        return [self.read_frame(start + i) for i in range(count)]

    def close(self):
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __len__(self):
        return self.frame_count


def open_sequence(path, meta: Optional[SequenceMeta] = None) -> SequenceReader:
    """Open a raw sequence; explicit metadata wins over sidecar over filename."""
    path = Path(path)
    if not path.is_file():
        raise FileMissing(f"no such sequence file: {path}")
    if meta is None:
        meta = load_sidecar(path)
    if meta is None:
        meta = parse_sequence_filename(path)
    if meta is None:
        raise UnsupportedFormat(
            f"{path}: no metadata given, no JSON sidecar, and the filename does not "
            "follow name_WxH_fps.yuv"
        )
    return SequenceReader(path, meta)


def write_sequence(path, frames: Sequence[FrameBuffer]) -> None:
    """Write frames to a raw YUV 4:2:0 file (exclusive writer)."""
    with open(path, "wb") as fh:
        for frame in frames:
            fh.write(frame.to_bytes())


def crop(frame: _Planar, x: int, y: int, w: int, h: int) -> PatchPayload:
    """Copy the even-aligned sub-rectangle (x, y, w, h) out of a frame."""
    if any(v % 2 for v in (x, y, w, h)):
        raise OddGeometry(f"crop ({x},{y},{w},{h}) must be even-aligned for 4:2:0")
    if w <= 0 or h <= 0:
        raise OutOfBounds(f"empty crop {w}x{h}")
    if x < 0 or y < 0 or x + w > frame.width or y + h > frame.height:
        raise OutOfBounds(
            f"crop ({x},{y},{w},{h}) outside {frame.width}x{frame.height} frame"
        )
    return PatchPayload(
        frame.y[y:y + h, x:x + w],
        frame.u[y // 2:(y + h) // 2, x // 2:(x + w) // 2],
        frame.v[y // 2:(y + h) // 2, x // 2:(x + w) // 2],
    )


def upsample_chroma_nearest(plane: np.ndarray) -> np.ndarray:
    """2x nearest-neighbour chroma upsampling (exactly invertible by [::2, ::2])."""
    return plane.repeat(2, axis=0).repeat(2, axis=1)


def upsample_chroma_bilinear(plane: np.ndarray) -> np.ndarray:
    """2x bilinear chroma upsampling used when assembling classifier inputs.

    Samples are co-sited with the top-left pixel of each 2x2 luma group;
    edges clamp.
    """
    p = plane.astype(np.float32)
    right = np.hstack([p[:, 1:], p[:, -1:]])   # neighbour to the right, clamped
    down = np.vstack([p[1:], p[-1:]])          # neighbour below, clamped
    down_right = np.vstack([right[1:], right[-1:]])
    h, w = p.shape
    out = np.empty((2 * h, 2 * w), dtype=np.float32)
    out[0::2, 0::2] = p
    out[0::2, 1::2] = (p + right) / 2
    out[1::2, 0::2] = (p + down) / 2
    out[1::2, 1::2] = (p + right + down + down_right) / 4
    return out


def yuv420_to_rgb(frame: _Planar) -> np.ndarray:
    """BT.601 full-range YUV -> RGB, uint8 (H, W, 3). Chroma nearest-upsampled."""
    y = frame.y.astype(np.float32)
    u = upsample_chroma_nearest(frame.u).astype(np.float32) - 128.0
    v = upsample_chroma_nearest(frame.v).astype(np.float32) - 128.0
    r = y + 1.402 * v
    g = y - 0.344136 * u - 0.714136 * v
    b = y + 1.772 * u
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
