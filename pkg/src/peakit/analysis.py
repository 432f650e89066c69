"""Artifact pattern and intensity measures over compressed sequences.

Every analysed patch carries a 6-bit pattern (one flag per artifact type in
the fixed bit order); its intensity is the fraction of set flags. A
sequence's intensity averages patch intensity over all non-overlapping grid
cells, with temporal flags computed once per 10-frame span and held fixed
across that span's frames.
"""

import json
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import GeometryMismatch, MissingClassifier, SequenceTooShort
from .pea_types import SPATIAL_TYPES, TEMPORAL_SPAN, TEMPORAL_TYPES, PeaType
from .video_io import FrameBuffer, PatchPayload, SequenceReader, crop

BIT_ORDER = tuple(PeaType)


@dataclass(frozen=True)
class PeaPattern:
    """Six binary flags in the order blurring, blocking, ringing,
    color bleeding, flickering, floating."""

    flags: Tuple[int, ...]

    def __post_init__(self):
        if len(self.flags) != 6 or any(f not in (0, 1) for f in self.flags):
            raise ValueError(f"pattern needs six 0/1 flags, got {self.flags}")

    def __str__(self) -> str:
        return "".join(str(f) for f in self.flags)

    @classmethod
    def from_string(cls, s: str) -> "PeaPattern":
        if len(s) != 6 or set(s) - {"0", "1"}:
            raise ValueError(f"pattern string must be six 0/1 chars, got {s!r}")
        return cls(tuple(int(c) for c in s))

    @classmethod
    def from_mapping(cls, flags: Mapping[PeaType, bool]) -> "PeaPattern":
        return cls(tuple(1 if flags.get(t, False) else 0 for t in BIT_ORDER))

    @property
    def intensity(self) -> float:
        return sum(self.flags) / 6.0


def patch_intensity(pattern: PeaPattern) -> float:
    """Fraction of positive flags; permutation-invariant by construction."""
    return pattern.intensity


def _require_bank(classifiers: Mapping[PeaType, object]) -> None:
    missing = [t.wire_name for t in PeaType if t not in classifiers]
    if missing:
        raise MissingClassifier(f"no classifier for: {', '.join(missing)}")


def _center_crop(cell: PatchPayload, window: int) -> PatchPayload:
    if cell.width < window or cell.height < window:
        raise GeometryMismatch(
            f"cell {cell.width}x{cell.height} smaller than window {window}"
        )
    off_x = (cell.width - window) // 2
    off_y = (cell.height - window) // 2
    off_x -= off_x % 2
    off_y -= off_y % 2
    return crop(cell, off_x, off_y, window, window)


def patch_pattern(
    classifiers: Mapping[PeaType, object],
    spatial_cell: PatchPayload,
    temporal_cell: Optional[Sequence[PatchPayload]] = None,
) -> PeaPattern:
    """Evaluate the full classifier bank on one grid cell.

    Each classifier sees its own window size, center-cropped from the cell.
    Without a temporal cell (sequence too short) the temporal flags are 0.
    """
    _require_bank(classifiers)
    flags: Dict[PeaType, bool] = {}
    for t in SPATIAL_TYPES:
        clf = classifiers[t]
        payload = _center_crop(spatial_cell, clf.window_size)
        flags[t] = bool(clf.predict_payloads([payload])[0])
    for t in TEMPORAL_TYPES:
        if temporal_cell is None:
            flags[t] = False
            continue
        clf = classifiers[t]
        frames = [_center_crop(f, clf.window_size) for f in temporal_cell]
        flags[t] = bool(clf.predict_payloads([frames])[0])
    return PeaPattern.from_mapping(flags)


@dataclass
class IntensityReport:
    sequence: str
    qp: Optional[int]
    coding_structure: Optional[str]
    grid_size: int
    cells_x: int
    cells_y: int
    frames_covered: int
    n_spans: int
    temporal_covered: bool
    rates: Dict[PeaType, float]
    overall_intensity: float

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "qp": self.qp,
            "coding_structure": self.coding_structure,
            "grid_size": self.grid_size,
            "cells_x": self.cells_x,
            "cells_y": self.cells_y,
            "frames_covered": self.frames_covered,
            "n_spans": self.n_spans,
            "temporal_covered": self.temporal_covered,
            "rates": {t.wire_name: r for t, r in self.rates.items()},
            "overall_intensity": self.overall_intensity,
        }

    @property
    def spatial_mean(self) -> float:
        return sum(self.rates[t] for t in SPATIAL_TYPES) / len(SPATIAL_TYPES)

    @property
    def temporal_mean(self) -> float:
        return sum(self.rates[t] for t in TEMPORAL_TYPES) / len(TEMPORAL_TYPES)


def _grid_cells(width: int, height: int, grid: int) -> Tuple[np.ndarray, np.ndarray]:
    xs = np.arange(width // grid) * grid
    ys = np.arange(height // grid) * grid
    return xs, ys


def sequence_intensity(
    classifiers: Mapping[PeaType, object],
    reader: SequenceReader,
    grid_size: Optional[int] = None,
) -> IntensityReport:
    """Average patch intensity over all non-overlapping grid cells.

    The grid defaults to the largest classifier window. Temporal flags come
    from non-overlapping 10-frame spans; analysis covers the span-aligned
    prefix of the sequence. Sequences shorter than one span are analysed
    spatially with the temporal flags recorded as absent.
    """
    _require_bank(classifiers)
    grid = grid_size or max(classifiers[t].window_size for t in PeaType)
    meta = reader.meta
    xs, ys = _grid_cells(meta.width, meta.height, grid)
    if len(xs) == 0 or len(ys) == 0:
        raise GeometryMismatch(
            f"{meta.width}x{meta.height} frame holds no {grid}px grid cell"
        )
    n_cells = len(xs) * len(ys)

    n_spans = reader.frame_count // TEMPORAL_SPAN
    temporal_covered = n_spans >= 1
    frames_covered = n_spans * TEMPORAL_SPAN if temporal_covered else reader.frame_count

    # temporal flags per (span, type, cell)
    temporal_bits = {t: np.zeros((max(n_spans, 1), n_cells), dtype=bool) for t in TEMPORAL_TYPES}
    for span in range(n_spans):
        frames = reader.read_frames(span * TEMPORAL_SPAN, TEMPORAL_SPAN)
        cell_stacks = []
        for y in ys:
            for x in xs:
                cell_stacks.append([crop(f, int(x), int(y), grid, grid) for f in frames])
        for t in TEMPORAL_TYPES:
            clf = classifiers[t]
            payloads = [
                [_center_crop(f, clf.window_size) for f in stack]
                for stack in cell_stacks
            ]
            temporal_bits[t][span] = clf.predict_payloads(payloads)

    flag_total = 0
    spatial_pos = {t: 0 for t in SPATIAL_TYPES}
    for f_idx in range(frames_covered):
        frame = reader.read_frame(f_idx)
        cells = [crop(frame, int(x), int(y), grid, grid) for y in ys for x in xs]
        span = f_idx // TEMPORAL_SPAN
        for t in SPATIAL_TYPES:
            clf = classifiers[t]
            payloads = [_center_crop(c, clf.window_size) for c in cells]
            bits = np.asarray(clf.predict_payloads(payloads), dtype=bool)
            spatial_pos[t] += int(bits.sum())
            flag_total += int(bits.sum())
        if temporal_covered:
            for t in TEMPORAL_TYPES:
                flag_total += int(temporal_bits[t][span].sum())

    spatial_units = frames_covered * n_cells
    rates: Dict[PeaType, float] = {}
    for t in SPATIAL_TYPES:
        rates[t] = spatial_pos[t] / spatial_units if spatial_units else 0.0
    for t in TEMPORAL_TYPES:
        if temporal_covered:
            rates[t] = float(temporal_bits[t][:n_spans].sum()) / (n_spans * n_cells)
        else:
            rates[t] = 0.0

    overall = flag_total / (spatial_units * 6) if spatial_units else 0.0
    return IntensityReport(
        sequence=meta.name,
        qp=meta.qp,
        coding_structure=meta.coding_structure,
        grid_size=grid,
        cells_x=len(xs),
        cells_y=len(ys),
        frames_covered=frames_covered,
        n_spans=n_spans,
        temporal_covered=temporal_covered,
        rates=rates,
        overall_intensity=overall,
    )


def pea_map(classifier, frame_or_frames, grid_size: Optional[int] = None) -> np.ndarray:
    """Per-cell binary detection map (uint8, 255 = artifact detected)."""
    grid = grid_size or classifier.window_size
    temporal = classifier.n_frames == TEMPORAL_SPAN
    if temporal:
        frames = list(frame_or_frames)
        if len(frames) != TEMPORAL_SPAN:
            raise SequenceTooShort(
                f"temporal map needs {TEMPORAL_SPAN} frames, got {len(frames)}"
            )
        base = frames[0]
    else:
        base = frame_or_frames
        frames = None
    xs, ys = _grid_cells(base.width, base.height, grid)
    out = np.zeros((len(ys), len(xs)), dtype=np.uint8)
    payloads = []
    for y in ys:
        for x in xs:
            if temporal:
                payloads.append(
                    [_center_crop(crop(f, int(x), int(y), grid, grid), classifier.window_size)
                     for f in frames]
                )
            else:
                payloads.append(
                    _center_crop(crop(base, int(x), int(y), grid, grid), classifier.window_size)
                )
    if payloads:
        bits = np.asarray(classifier.predict_payloads(payloads), dtype=bool)
        out.reshape(-1)[:] = np.where(bits, 255, 0)
    return out


def combined_map(
    classifiers: Mapping[PeaType, object],
    frame: FrameBuffer,
    cuboid: Optional[Sequence[FrameBuffer]] = None,
    grid_size: Optional[int] = None,
) -> np.ndarray:
    """Per-cell patch intensity scaled to 0..255 (round half up)."""
    _require_bank(classifiers)
    grid = grid_size or max(classifiers[t].window_size for t in PeaType)
    xs, ys = _grid_cells(frame.width, frame.height, grid)
    counts = np.zeros((len(ys), len(xs)), dtype=np.int32)
    for t in SPATIAL_TYPES:
        counts += (pea_map(classifiers[t], frame, grid) > 0).astype(np.int32)
    if cuboid is not None:
        for t in TEMPORAL_TYPES:
            counts += (pea_map(classifiers[t], cuboid, grid) > 0).astype(np.int32)
    return np.floor(counts / 6.0 * 255.0 + 0.5).astype(np.uint8)


def write_pgm(image: np.ndarray, path) -> None:
    """Binary 8-bit PGM writer for map images."""
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


@dataclass
class QpReportTable:
    """Per-(sequence, type, qp) intensity rows plus the Qp monotonicity
    diagnostic: the fraction of (sequence, type) series that are
    non-decreasing in Qp (None when no series has two Qp points)."""

    rows: List[dict]
    monotonicity: Optional[float]

    def to_json(self) -> str:
        return json.dumps(
            {"rows": self.rows, "monotonicity": self.monotonicity},
            sort_keys=True,
        )

    def to_csv_lines(self) -> List[str]:
        header = "sequence,qp,structure,type,rate,spatial_mean,temporal_mean,overall"
        lines = [header]
        for r in self.rows:
            lines.append(
                f"{r['sequence']},{r['qp']},{r['structure'] or ''},{r['type']},"
                f"{r['rate']!r},{r['spatial_mean']!r},{r['temporal_mean']!r},"
                f"{r['overall']!r}"
            )
        return lines


def qp_report(reports: Sequence[IntensityReport]) -> QpReportTable:
    """Tabulate per-type intensity against Qp and measure monotonicity."""
    rows = []
    for rep in reports:
        for t in PeaType:
            rows.append({
                "sequence": rep.sequence,
                "qp": rep.qp,
                "structure": rep.coding_structure,
                "type": t.wire_name,
                "rate": rep.rates[t],
                "spatial_mean": rep.spatial_mean,
                "temporal_mean": rep.temporal_mean,
                "overall": rep.overall_intensity,
            })
    rows.sort(key=lambda r: (r["sequence"], r["type"], r["qp"] if r["qp"] is not None else -1))

    series: Dict[Tuple[str, str], List[Tuple[int, float]]] = {}
    for rep in reports:
        if rep.qp is None:
            continue
        for t in PeaType:
            series.setdefault((rep.sequence, t.wire_name), []).append((rep.qp, rep.rates[t]))
    evaluable = 0
    monotone = 0
    for values in series.values():
        values.sort()
        if len(values) < 2:
            continue
        evaluable += 1
        if all(b[1] >= a[1] for a, b in zip(values, values[1:])):
            monotone += 1
    diagnostic = monotone / evaluable if evaluable else None
    return QpReportTable(rows=rows, monotonicity=diagnostic)
