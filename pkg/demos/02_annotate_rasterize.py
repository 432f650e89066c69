"""Subject annotations: elliptical circles, masks, merging, session files.

Run from the repository root:  python3 demos/02_annotate_rasterize.py
"""

import tempfile
from pathlib import Path

from peakit.annotation import (
    EllipseAnnotation,
    load_session,
    masks_for_frame,
    rasterize,
    save_session,
    union_masks,
    vote_masks,
)
from peakit.pea_types import PeaType

W, H = 128, 96

# Two subjects circled overlapping blocking regions on frame 7; a third
# marked a flickering region, which covers frames 7..16 (a 10-frame span).
session = [
    EllipseAnnotation("clip", 7, PeaType.BLOCKING, cx=40, cy=40, rx=18, ry=12,
                      subject_id="s01"),
    EllipseAnnotation("clip", 7, PeaType.BLOCKING, cx=52, cy=44, rx=14, ry=14,
                      subject_id="s02"),
    EllipseAnnotation("clip", 7, PeaType.FLICKERING, cx=90, cy=60, rx=20, ry=16,
                      subject_id="s03", temporal=True),
]

masks = [rasterize(a, W, H) for a in session[:2]]
print(f"subject areas: {[m.area for m in masks]} px")

merged = union_masks(masks)
strict = vote_masks(masks, min_votes=2)
print(f"union area {merged.area}, majority-2 area {strict.area} "
      "(union is the pipeline default)")

# masks_for_frame pulls every relevant circle for one (frame, type); the
# temporal mark contributes to each frame of its span.
for frame in (7, 12, 17):
    m = masks_for_frame(session, "clip", frame, PeaType.FLICKERING, W, H)
    print(f"flickering mask on frame {frame:2d}: area {m.area}")

# Sessions persist as one JSON object per line, append-friendly.
path = Path(tempfile.mkdtemp(prefix="pea-demo-")) / "session.jsonl"
save_session(session, path)
print(f"\n{path}:")
print(path.read_text().strip())
assert load_session(path) == session
print("round trip ok")
