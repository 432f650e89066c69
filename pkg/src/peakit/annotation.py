"""Subject-circled artifact regions: elliptical annotations, masks, sessions.

Subjects circle a region on a paused frame; circles are modelled as
axis-aligned ellipses and rasterized with the pixel-center inclusion rule.
Sessions persist as line-delimited JSON (one annotation per line) so a live
annotation service can append safely.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, ParseError
from .pea_types import TEMPORAL_SPAN, PeaType

_WIRE_FIELDS = ("sequence", "frame", "pea_type", "cx", "cy", "rx", "ry", "subject_id", "temporal")


@dataclass(frozen=True)
class EllipseAnnotation:
    """One circled region: axis-aligned ellipse on a frame of a sequence."""

    sequence: str
    frame: int
    pea_type: PeaType
    cx: float
    cy: float
    rx: float
    ry: float
    subject_id: str
    temporal: bool = False

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"frame {self.frame} is negative")
        if self.rx <= 0 or self.ry <= 0:
            raise ValueError(f"semi-axes must be > 0, got rx={self.rx}, ry={self.ry}")
        if self.cx < 0 or self.cy < 0:
            raise ValueError(f"center ({self.cx},{self.cy}) is negative")
        if self.temporal and not self.pea_type.is_temporal:
            raise ValueError(
                f"temporal mark with spatial pea_type {self.pea_type.wire_name}"
            )

    def validate_against(self, width: int, height: int, frame_count: Optional[int] = None):
        """Check frame-dependent invariants (center in frame, span fits)."""
        if not 0 <= self.cx < width or not 0 <= self.cy < height:
            raise ValueError(
                f"center ({self.cx},{self.cy}) outside {width}x{height} frame"
            )
        if frame_count is not None:
            if self.frame >= frame_count:
                raise ValueError(f"frame {self.frame} >= frame_count {frame_count}")
            if self.temporal and self.frame + TEMPORAL_SPAN > frame_count:
                raise ValueError(
                    f"temporal mark at frame {self.frame} spans past "
                    f"frame_count {frame_count}"
                )

    def to_wire(self) -> dict:
        return {
            "sequence": self.sequence,
            "frame": self.frame,
            "pea_type": self.pea_type.wire_name,
            "cx": self.cx,
            "cy": self.cy,
            "rx": self.rx,
            "ry": self.ry,
            "subject_id": self.subject_id,
            "temporal": self.temporal,
        }

    @classmethod
    def from_wire(cls, d: dict) -> "EllipseAnnotation":
        return cls(
            sequence=str(d["sequence"]),
            frame=int(d["frame"]),
            pea_type=PeaType.from_wire(str(d["pea_type"])),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            rx=float(d["rx"]),
            ry=float(d["ry"]),
            subject_id=str(d["subject_id"]),
            temporal=bool(d.get("temporal", False)),
        )


@dataclass(frozen=True)
class TemporalMark:
    """A temporal annotation: an ellipse that covers the 10 frames starting
    at the marked one."""

    annotation: EllipseAnnotation
    span: int = TEMPORAL_SPAN

    def __post_init__(self):
        if not self.annotation.temporal:
            raise ValueError("TemporalMark requires an annotation with temporal=True")
        if self.span != TEMPORAL_SPAN:
            raise ValueError(f"span is fixed at {TEMPORAL_SPAN}")

    @property
    def start_frame(self) -> int:
        return self.annotation.frame

    @property
    def frames(self) -> range:
        return range(self.start_frame, self.start_frame + self.span)

    def validate_against(self, width: int, height: int, frame_count: int):
        self.annotation.validate_against(width, height, frame_count)


class RegionMask:
    """Binary frame-sized mask; 1 marks pixels inside a circled region."""

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray):
        self.bits = np.ascontiguousarray(bits, dtype=bool)
        if self.bits.ndim != 2:
            raise DimensionMismatch(f"mask must be 2-D, got shape {self.bits.shape}")

    @classmethod
    def zeros(cls, width: int, height: int) -> "RegionMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other):
        return isinstance(other, RegionMask) and np.array_equal(self.bits, other.bits)


def rasterize(ann: EllipseAnnotation, width: int, height: int) -> RegionMask:
    """Rasterize an ellipse with pixel-center inclusion.

    Pixel (px, py) is set iff its center (px+0.5, py+0.5) satisfies
    ((x-cx)/rx)^2 + ((y-cy)/ry)^2 <= 1. Extents beyond the frame clip away.
    """
    xs = (np.arange(width, dtype=np.float64) + 0.5 - ann.cx) / ann.rx
    ys = (np.arange(height, dtype=np.float64) + 0.5 - ann.cy) / ann.ry
    inside = xs[None, :] ** 2 + ys[:, None] ** 2 <= 1.0
    return RegionMask(inside)


def union_masks(
    masks: Sequence[RegionMask],
    width: Optional[int] = None,
    height: Optional[int] = None,
) -> RegionMask:
    """Bitwise OR of masks; an empty list yields all zeros at (width, height)."""
    if not masks:
        if width is None or height is None:
            raise DimensionMismatch("empty union needs explicit width and height")
        return RegionMask.zeros(width, height)
    first = masks[0]
    out = first.bits.copy()
    for m in masks[1:]:
        if m.bits.shape != out.shape:
            raise DimensionMismatch(
                f"mask {m.width}x{m.height} does not match {first.width}x{first.height}"
            )
        out |= m.bits
    return RegionMask(out)


def vote_masks(masks: Sequence[RegionMask], min_votes: int) -> RegionMask:
    """Majority-k merge: pixel set iff at least ``min_votes`` masks set it.

    ``min_votes=1`` equals :func:`union_masks`. Offered as a configuration
    for reconciling disagreeing subjects; the pipeline default stays union.
    """
    if not masks:
        raise DimensionMismatch("vote over an empty list needs at least one mask")
    if min_votes < 1:
        raise ValueError("min_votes must be >= 1")
    shape = masks[0].bits.shape
    counts = np.zeros(shape, dtype=np.int32)
    for m in masks:
        if m.bits.shape != shape:
            raise DimensionMismatch("masks differ in dimensions")
        counts += m.bits
    return RegionMask(counts >= min_votes)


def save_session(annotations: Sequence[EllipseAnnotation], path) -> None:
    """Write annotations as line-delimited JSON, order preserved."""
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_wire(), sort_keys=True) + "\n")


def append_annotation(path, ann: EllipseAnnotation) -> None:
    """Durably append a single annotation (flushed and fsynced)."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(ann.to_wire(), sort_keys=True) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def load_session(path) -> List[EllipseAnnotation]:
    """Read a line-delimited JSON session; raises ParseError with diagnostics."""
    out = []
    text = Path(path).read_text("utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", line=lineno) from None
        for field in _WIRE_FIELDS[:-1]:  # temporal may default
            if field not in d:
                raise ParseError("missing field", line=lineno, field=field)
        try:
            ann = EllipseAnnotation.from_wire(d)
        except ValueError as e:
            field = _offending_field(d)
            raise ParseError(str(e), line=lineno, field=field) from None
        out.append(ann)
    return out


def _offending_field(d: dict) -> Optional[str]:
    """Best-effort: which wire field breaks an invariant."""
    checks = (
        ("pea_type", lambda v: PeaType.from_wire(str(v)) is not None),
        ("rx", lambda v: float(v) > 0),
        ("ry", lambda v: float(v) > 0),
        ("frame", lambda v: int(v) >= 0),
        ("cx", lambda v: float(v) >= 0),
        ("cy", lambda v: float(v) >= 0),
    )
    for field, ok in checks:
        try:
            if not ok(d[field]):
                return field
        except (ValueError, KeyError, TypeError):
            return field
    if d.get("temporal"):
        return "temporal"
    return None


def masks_for_frame(
    annotations: Sequence[EllipseAnnotation],
    sequence: str,
    frame: int,
    pea_type: PeaType,
    width: int,
    height: int,
    min_votes: int = 1,
) -> RegionMask:
    """Merge all subjects' circles for one (sequence, frame, pea_type).

    Temporal marks contribute to every frame of their 10-frame span.
    """
    masks = []
    for ann in annotations:
        if ann.sequence != sequence or ann.pea_type != pea_type:
            continue
        if ann.temporal:
            if not ann.frame <= frame < ann.frame + TEMPORAL_SPAN:
                continue
        elif ann.frame != frame:
            continue
        masks.append(rasterize(ann, width, height))
    if not masks:
        return RegionMask.zeros(width, height)
    if min_votes == 1:
        return union_masks(masks)
    return vote_masks(masks, min_votes)
