"""Append-only binary store for labeled patches, with a CSV manifest.

Record layout, little-endian:

    magic    4 bytes  "PEA2"
    version  u16      = 1
    pea_type u8
    label    u8
    size     u16
    n_frames u8
    qp       u8       (255 marks reference-source patches)
    frame    u32
    x        u16
    y        u16
    name_len u8
    name     UTF-8 bytes
    payload_len u32
    payload  raw planar samples, n_frames x (Y size^2 + U size^2/4 + V size^2/4)

Records become visible to readers only once their manifest row is written.
"""

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from .errors import CorruptRecord, PayloadLengthMismatch
from .pea_types import PeaType

MAGIC = b"PEA2"
VERSION = 1
QP_REFERENCE = 255

_HEADER = struct.Struct("<4sHBBHBBIHHB")
_PAYLOAD_LEN = struct.Struct("<I")

MANIFEST_COLUMNS = (
    "offset", "pea_type", "label", "size", "n_frames",
    "qp", "sequence", "frame", "x", "y", "split",
)


def payload_length(size: int, n_frames: int) -> int:
    """Bytes in an n_frames stack of 4:2:0 patches of the given side."""
    return n_frames * (size * size * 3 // 2)


@dataclass(frozen=True)
class PatchRecord:
    pea_type: PeaType
    label: int
    size: int
    n_frames: int
    qp: int
    sequence: str
    frame_number: int
    x: int
    y: int
    payload: bytes

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.size != self.pea_type.window_size:
            raise ValueError(
                f"{self.pea_type.wire_name} patches are "
                f"{self.pea_type.window_size}x{self.pea_type.window_size}, got size {self.size}"
            )
        if self.n_frames != self.pea_type.n_frames:
            raise ValueError(
                f"{self.pea_type.wire_name} records span {self.pea_type.n_frames} "
                f"frame(s), got {self.n_frames}"
            )
        if not (0 <= self.qp <= 51 or self.qp == QP_REFERENCE):
            raise ValueError(f"qp must be 0..51 or {QP_REFERENCE}, got {self.qp}")
        expected = payload_length(self.size, self.n_frames)
        if len(self.payload) != expected:
            raise PayloadLengthMismatch(
                f"payload is {len(self.payload)} bytes, geometry requires {expected}"
            )

    @property
    def record_id(self) -> str:
        """Stable identity used for split assignment."""
        return (
            f"{self.sequence}:{self.frame_number}:{self.x}:{self.y}:"
            f"{self.pea_type.wire_name}:{self.label}:{self.qp}"
        )

    def to_bytes(self) -> bytes:
        name = self.sequence.encode("utf-8")
        if len(name) > 255:
            raise ValueError("sequence name longer than 255 UTF-8 bytes")
        head = _HEADER.pack(
            MAGIC, VERSION, int(self.pea_type), self.label, self.size,
            self.n_frames, self.qp, self.frame_number, self.x, self.y, len(name),
        )
        return head + name + _PAYLOAD_LEN.pack(len(self.payload)) + self.payload


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptRecord(f"truncated record: short read in {what}")
    return data


def read_record_from(fh) -> PatchRecord:
    """Parse one record at the current position of a binary file object."""
    head = _read_exact(fh, _HEADER.size, "header")
    (magic, version, pea_type, label, size, n_frames, qp,
     frame_number, x, y, name_len) = _HEADER.unpack(head)
    if magic != MAGIC:
        raise CorruptRecord(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptRecord(f"unsupported version {version}")
    name = _read_exact(fh, name_len, "name").decode("utf-8")
    (payload_len,) = _PAYLOAD_LEN.unpack(_read_exact(fh, 4, "payload length"))
    expected = payload_length(size, n_frames)
    if payload_len != expected:
        raise CorruptRecord(
            f"payload length {payload_len} inconsistent with geometry "
            f"{size}x{size}x{n_frames} ({expected})"
        )
    payload = _read_exact(fh, payload_len, "payload")
    try:
        return PatchRecord(
            pea_type=PeaType(pea_type), label=label, size=size, n_frames=n_frames,
            qp=qp, sequence=name, frame_number=frame_number, x=x, y=y, payload=payload,
        )
    except ValueError as e:
        raise CorruptRecord(str(e)) from None


@dataclass
class ManifestRow:
    offset: int
    pea_type: PeaType
    label: int
    size: int
    n_frames: int
    qp: int
    sequence: str
    frame: int
    x: int
    y: int
    split: str = ""


class DatasetStore:
    """Single-writer, multi-reader patch store backed by one data file.

    The manifest CSV lives next to the data file (``<path>.manifest.csv``).
    A record is committed by its manifest row; readers iterate the manifest.
    """

    def __init__(self, path, mode: str = "a"):
        if mode not in ("a", "r"):
            raise ValueError(f"mode must be 'a' or 'r', got {mode!r}")
        self.path = Path(path)
        self.manifest_path = Path(str(path) + ".manifest.csv")
        self.mode = mode
        if mode == "a":
            self._data = open(self.path, "ab")
            new_manifest = not self.manifest_path.exists()
            self._manifest = open(self.manifest_path, "a", newline="", encoding="utf-8")
            self._writer = csv.writer(self._manifest)
            if new_manifest:
                self._writer.writerow(MANIFEST_COLUMNS)
                self._manifest.flush()
        else:
            if not self.path.exists():
                raise CorruptRecord(f"no store at {self.path}")
            self._data = None
            self._manifest = None
            self._writer = None
        self._rows: Optional[List[ManifestRow]] = None

    # -- writing -----------------------------------------------------------

    def append(self, record: PatchRecord, split: str = "") -> int:
        if self.mode != "a":
            raise CorruptRecord("store opened read-only")
        offset = self._data.tell()
        self._data.write(record.to_bytes())
        self._data.flush()
        self._writer.writerow([
            offset, record.pea_type.wire_name, record.label, record.size,
            record.n_frames, record.qp, record.sequence, record.frame_number,
            record.x, record.y, split,
        ])
        self._manifest.flush()
        self._rows = None
        return offset

    def assign_splits(self, assignment: Dict[str, str]) -> None:
        """Rewrite the manifest with split tags keyed by record_id."""
        rows = self.manifest_rows()
        with open(self.manifest_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(MANIFEST_COLUMNS)
            for row in rows:
                rid = (
                    f"{row.sequence}:{row.frame}:{row.x}:{row.y}:"
                    f"{row.pea_type.wire_name}:{row.label}:{row.qp}"
                )
                row.split = assignment.get(rid, row.split)
                writer.writerow([
                    row.offset, row.pea_type.wire_name, row.label, row.size,
                    row.n_frames, row.qp, row.sequence, row.frame, row.x, row.y,
                    row.split,
                ])
        self._rows = None

    # -- reading -----------------------------------------------------------

    def read(self, offset: int) -> PatchRecord:
        if self._data is not None:
            self._data.flush()
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            return read_record_from(fh)

    def manifest_rows(self) -> List[ManifestRow]:
        if self._rows is not None:
            return self._rows
        rows: List[ManifestRow] = []
        if self.manifest_path.exists():
            with open(self.manifest_path, newline="", encoding="utf-8") as fh:
                text = fh.read()
            lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
            reader = csv.DictReader(io.StringIO("\n".join(lines)))
            for d in reader:
                rows.append(ManifestRow(
                    offset=int(d["offset"]),
                    pea_type=PeaType.from_wire(d["pea_type"]),
                    label=int(d["label"]),
                    size=int(d["size"]),
                    n_frames=int(d["n_frames"]),
                    qp=int(d["qp"]),
                    sequence=d["sequence"],
                    frame=int(d["frame"]),
                    x=int(d["x"]),
                    y=int(d["y"]),
                    split=d["split"],
                ))
        prev = -1
        for row in rows:
            if row.offset <= prev:
                raise CorruptRecord("manifest offsets are not strictly increasing")
            prev = row.offset
        self._rows = rows
        return rows

    def __iter__(self) -> Iterator[Tuple[int, PatchRecord]]:
        for row in self.manifest_rows():
            yield row.offset, self.read(row.offset)

    def lookup(self, sequence: str, frame: int, x: int, y: int) -> List[PatchRecord]:
        """All records indexed at exactly (sequence, frame, x, y)."""
        out = []
        for row in self.manifest_rows():
            if (row.sequence, row.frame, row.x, row.y) == (sequence, frame, x, y):
                out.append(self.read(row.offset))
        return out

    def stats(self) -> Dict[Tuple[PeaType, int], int]:
        """Record counts per (pea_type, label); absent pairs count zero."""
        counts: Dict[Tuple[PeaType, int], int] = {}
        for row in self.manifest_rows():
            key = (row.pea_type, row.label)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def source_stats(self) -> Dict[Tuple[PeaType, str], int]:
        """Counts per (pea_type, source-kind): positive / compressed_negative /
        reference_negative, distinguished by label and the qp sentinel."""
        counts: Dict[Tuple[PeaType, str], int] = {}
        for row in self.manifest_rows():
            if row.label == 1:
                kind = "positive"
            elif row.qp == QP_REFERENCE:
                kind = "reference_negative"
            else:
                kind = "compressed_negative"
            key = (row.pea_type, kind)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def close(self):
        if self._data is not None:
            self._data.close()
            self._data = None
        if self._manifest is not None:
            self._manifest.close()
            self._manifest = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
