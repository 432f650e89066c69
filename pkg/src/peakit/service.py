"""HTTP service backing the browser annotator.

Endpoints:
    GET  /api/sequences                      sequence metadata list
    GET  /api/sequences/{name}/frames/{i}    frame rendered as PNG (BT.601)
    POST /api/annotations                    append one validated annotation
    GET  /api/annotations?sequence=          list annotations
    GET  /api/annotations/{index}/mask       rasterized ellipse as PNG (UI overlay)
    GET  /api/progress                       frames annotated per subject

Invariant violations return 400 with a field-level message; unknown
sequences or frames return 404. Annotation appends are fsynced before the
2xx response.
"""

import io
import threading
from dataclasses import asdict
from pathlib import Path
from typing import Dict, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from PIL import Image

from . import __version__
from .annotation import (
    EllipseAnnotation,
    append_annotation,
    load_session,
    rasterize,
)
from .errors import IndexOutOfRange, PeaKitError
from .pea_types import TEMPORAL_SPAN, PeaType
from .video_io import SequenceReader, load_sidecar, open_sequence, yuv420_to_rgb


def _error(status: int, message: str, field: Optional[str] = None) -> JSONResponse:
    body = {"error": message}
    if field is not None:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


class SequenceRegistry:
    """Lazy-opened readers for every .yuv sequence under a directory."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self._readers: Dict[str, SequenceReader] = {}
        self._paths: Dict[str, Path] = {}
        self._lock = threading.Lock()
        for path in sorted(self.data_dir.glob("*.yuv")):
            meta = load_sidecar(path)
            name = meta.name if meta else path.stem.split("_")[0]
            self._paths[name] = path

    def names(self):
        return sorted(self._paths)

    def reader(self, name: str) -> Optional[SequenceReader]:
        with self._lock:
            if name not in self._paths:
                return None
            if name not in self._readers:
                self._readers[name] = open_sequence(self._paths[name])
            return self._readers[name]


def _png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    mode = "L" if array.ndim == 2 else "RGB"
    Image.fromarray(array, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


_REQUIRED_FIELDS = ("sequence", "frame", "pea_type", "cx", "cy", "rx", "ry", "subject_id")


def create_app(data_dir, annotations_path) -> FastAPI:
    app = FastAPI(title="pea-annotator-service", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    registry = SequenceRegistry(Path(data_dir))
    annotations_path = Path(annotations_path)
    write_lock = threading.Lock()

    def annotations() -> list:
        if not annotations_path.exists():
            return []
        return load_session(annotations_path)

    @app.get("/api/sequences")
    def list_sequences():
        out = []
        for name in registry.names():
            reader = registry.reader(name)
            meta = asdict(reader.meta)
            meta["frame_count"] = reader.frame_count
            out.append(meta)
        return out

    @app.get("/api/sequences/{name}/frames/{index}")
    def get_frame(name: str, index: int):
        reader = registry.reader(name)
        if reader is None:
            return _error(404, f"unknown sequence {name!r}")
        try:
            frame = reader.read_frame(index)
        except IndexOutOfRange as e:
            return _error(404, str(e))
        return Response(content=_png_bytes(yuv420_to_rgb(frame)), media_type="image/png")

    @app.post("/api/annotations")
    async def post_annotation(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        for field in _REQUIRED_FIELDS:
            if field not in body:
                return _error(400, "missing required field", field=field)
        try:
            PeaType.from_wire(str(body["pea_type"]))
        except ValueError as e:
            return _error(400, str(e), field="pea_type")
        try:
            ann = EllipseAnnotation.from_wire(body)
        except (ValueError, TypeError) as e:
            return _error(400, str(e), field=_guess_field(body))
        reader = registry.reader(ann.sequence)
        if reader is None:
            return _error(400, f"unknown sequence {ann.sequence!r}", field="sequence")
        try:
            ann.validate_against(reader.meta.width, reader.meta.height,
                                 reader.frame_count)
        except ValueError as e:
            msg = str(e)
            field = "frame" if "frame" in msg else "cx"
            return _error(400, msg, field=field)
        with write_lock:
            append_annotation(annotations_path, ann)
            index = len(annotations()) - 1
        stored = ann.to_wire()
        stored["index"] = index
        if ann.temporal:
            stored["span"] = TEMPORAL_SPAN
        return JSONResponse(status_code=201, content=stored)

    @app.get("/api/annotations")
    def get_annotations(sequence: Optional[str] = None):
        out = []
        for i, ann in enumerate(annotations()):
            if sequence is not None and ann.sequence != sequence:
                continue
            wire = ann.to_wire()
            wire["index"] = i
            out.append(wire)
        return out

    @app.get("/api/annotations/{index}/mask")
    def get_annotation_mask(index: int):
        anns = annotations()
        if not 0 <= index < len(anns):
            return _error(404, f"no annotation at index {index}")
        ann = anns[index]
        reader = registry.reader(ann.sequence)
        if reader is None:
            return _error(404, f"unknown sequence {ann.sequence!r}")
        mask = rasterize(ann, reader.meta.width, reader.meta.height)
        return Response(
            content=_png_bytes(mask.bits.astype(np.uint8) * 255),
            media_type="image/png",
        )

    @app.get("/api/progress")
    def progress():
        subjects: Dict[str, dict] = {}
        for ann in annotations():
            entry = subjects.setdefault(
                ann.subject_id, {"total_annotations": 0, "sequences": {}}
            )
            entry["total_annotations"] += 1
            seq = entry["sequences"].setdefault(
                ann.sequence, {"annotations": 0, "frames": []}
            )
            seq["annotations"] += 1
            if ann.frame not in seq["frames"]:
                seq["frames"].append(ann.frame)
        for entry in subjects.values():
            for seq in entry["sequences"].values():
                seq["frames"].sort()
                seq["frames_annotated"] = len(seq["frames"])
        return {"subjects": subjects}

    @app.exception_handler(PeaKitError)
    def handle_toolkit_error(request, exc):
        return _error(400, str(exc))

    return app


def _guess_field(body: dict) -> Optional[str]:
    try:
        if float(body.get("rx", 1)) <= 0:
            return "rx"
        if float(body.get("ry", 1)) <= 0:
            return "ry"
        if int(body.get("frame", 0)) < 0:
            return "frame"
        if bool(body.get("temporal", False)):
            return "temporal"
    except (TypeError, ValueError):
        pass
    return None


def run(data_dir, annotations_path, host: str = "127.0.0.1", port: int = 8750):
    import uvicorn

    uvicorn.run(create_app(data_dir, annotations_path), host=host, port=port,
                log_level="warning")
