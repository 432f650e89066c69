"""From masks to a labeled patch store: sliding windows, the at-least-half
rule, reference negatives at 1:2, a 75:25 split, and binary persistence.

Run from the repository root:  python3 demos/03_patch_dataset.py
"""

import tempfile
from pathlib import Path

import numpy as np

from peakit.annotation import EllipseAnnotation, rasterize
from peakit.dataset_store import QP_REFERENCE, DatasetStore, PatchRecord, payload_length
from peakit.patch_pipeline import Source, label_spatial, sample_negatives, split
from peakit.pea_types import PeaType

W, H = 288, 144  # 9x4 grid of 32px windows

ann = EllipseAnnotation("clip", 0, PeaType.RINGING, cx=80, cy=64, rx=60, ry=40,
                        subject_id="s01")
mask = rasterize(ann, W, H)

# A window is positive iff at least half of its pixels lie in the circle.
windows = label_spatial(mask, size=32, pea_type=PeaType.RINGING)
positives = [w for w in windows if w.label == 1]
negatives = [w for w in windows if w.label == 0]
print(f"{len(windows)} grid windows -> {len(positives)} positive, "
      f"{len(negatives)} compressed-uncircled negative")

# Reference negatives come from the uncompressed clip, anywhere in frame,
# two per compressed negative by default.
refs = sample_negatives(negatives, width=W, height=H, frame_indices=[0],
                        seed=7, ratio=(1, 2))
print(f"{len(refs)} reference negatives sampled (ratio 1:2)")

# Records carry (type, label, geometry, indexing triple, raw payload).
work = Path(tempfile.mkdtemp(prefix="pea-demo-"))
rng = np.random.default_rng(0)
with DatasetStore(work / "demo.bin") as store:
    for w in windows + refs:
        qp = QP_REFERENCE if w.source is Source.REFERENCE else 32
        payload = rng.integers(0, 256, payload_length(32, 1), dtype=np.uint8).tobytes()
        store.append(PatchRecord(
            pea_type=w.pea_type, label=w.label, size=32, n_frames=1, qp=qp,
            sequence="clip", frame_number=w.frame, x=w.x, y=w.y, payload=payload,
        ))
    print(f"stats: { {f'{t.wire_name}/{l}': n for (t, l), n in store.stats().items()} }")

    ids = [(f"{r.sequence}:{r.frame}:{r.x}:{r.y}:{r.pea_type.wire_name}:{r.label}:{r.qp}",
            r.label) for r in store.manifest_rows()]
    assignment = split(ids, seed=0)
    store.assign_splits(assignment.assignment)
    print(f"split: {len(assignment.train_ids)} train / {len(assignment.test_ids)} test")

    # lookup is exact on (sequence, frame, x, y)
    hit = store.lookup("clip", 0, positives[0].x, positives[0].y)
    print(f"lookup at ({positives[0].x},{positives[0].y}): "
          f"{len(hit)} record(s), label={hit[0].label}")
