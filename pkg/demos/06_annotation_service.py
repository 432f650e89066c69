"""Stand up the annotation service on a synthetic clip and walk the HTTP
API the browser annotator uses, then point a real browser at it.

Run from the repository root:  python3 demos/06_annotation_service.py
"""

import tempfile
import threading
import time
from pathlib import Path

import httpx
import uvicorn

from peakit.service import create_app
from peakit.synthetic import synthetic_frames, write_fixture_sequence
from peakit.video_io import SequenceMeta

PORT = 8751
work = Path(tempfile.mkdtemp(prefix="pea-demo-"))
write_fixture_sequence(
    work / "clip_96x64_30.yuv",
    SequenceMeta(name="clip", width=96, height=64, qp=32),
    synthetic_frames(96, 64, 20, seed=4),
)

app = create_app(work, work / "session.jsonl")
server = uvicorn.Server(uvicorn.Config(app, port=PORT, log_level="error"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
base = f"http://127.0.0.1:{PORT}"
print(f"service up at {base}")

with httpx.Client(base_url=base) as client:
    sequences = client.get("/api/sequences").json()
    print(f"sequences: {[s['name'] for s in sequences]}")

    png = client.get("/api/sequences/clip/frames/0")
    print(f"frame 0 as PNG: {len(png.content)} bytes, {png.headers['content-type']}")

    posted = client.post("/api/annotations", json={
        "sequence": "clip", "frame": 3, "pea_type": "ringing",
        "cx": 40, "cy": 30, "rx": 12, "ry": 9,
        "subject_id": "demo", "temporal": False,
    })
    print(f"posted annotation -> {posted.status_code}, index {posted.json()['index']}")

    bad = client.post("/api/annotations", json={
        "sequence": "clip", "frame": 3, "pea_type": "ringing",
        "cx": 40, "cy": 30, "rx": 0, "ry": 9,
        "subject_id": "demo", "temporal": False,
    })
    print(f"invalid rx=0 -> {bad.status_code}: {bad.json()}")

    progress = client.get("/api/progress").json()
    print(f"progress: {progress['subjects']}")

server.should_exit = True
thread.join(timeout=5)
print("""
To annotate interactively:
  1. peakit serve --data-dir <dir-of-yuv-files> --annotations session.jsonl
  2. cd frontend && npm install && npm run build
  3. serve frontend/ (e.g. python3 -m http.server) and open index.html?subject=s01,
     or open it from any static host pointing at the service URL.
""")
