"""Sequence-level artifact analysis: per-patch 6-bit patterns, intensity,
per-frame maps, and the intensity-vs-Qp table.

This demo drives the analysis stage with rule-based stub classifiers so it
runs in seconds; swap in trained checkpoints for real use.
Run from the repository root:  python3 demos/05_intensity_analysis.py
"""

import tempfile
from pathlib import Path

from peakit.analysis import (
    PeaPattern,
    combined_map,
    patch_intensity,
    pea_map,
    qp_report,
    sequence_intensity,
    write_pgm,
)
from peakit.pea_types import PeaType
from peakit.synthetic import (
    gradient_frames,
    luma_threshold_stub,
    stub_bank,
    threshold_bank,
    write_fixture_sequence,
)
from peakit.video_io import SequenceMeta, open_sequence

work = Path(tempfile.mkdtemp(prefix="pea-demo-"))

# A 6-bit pattern marks which artifact types a patch exhibits, in the fixed
# order blurring, blocking, ringing, color bleeding, flickering, floating.
p = PeaPattern.from_string("111000")
print(f"pattern {p} -> intensity {patch_intensity(p):.3f} "
      f"(equal to {PeaPattern.from_string('000111')} by symmetry)")

# Fixture clip: luma rises left to right, so a mean-luma threshold stub
# fires on exactly the left half of the grid cells.
frames = gradient_frames(64, 64, 10)
path = work / "fx_64x64_30.yuv"
meta = write_fixture_sequence(path, SequenceMeta(name="fx", width=64, height=64),
                              frames)
reader = open_sequence(path, meta)

bank = stub_bank(False)
bank[PeaType.BLOCKING] = luma_threshold_stub(PeaType.BLOCKING, 128.0)
report = sequence_intensity(bank, reader)
print(f"\ngrid {report.cells_x}x{report.cells_y}, frames {report.frames_covered}, "
      f"spans {report.n_spans}")
print(f"blocking rate {report.rates[PeaType.BLOCKING]:.3f}, "
      f"overall intensity {report.overall_intensity:.4f}")

image = pea_map(bank[PeaType.BLOCKING], frames[0])
write_pgm(image, work / "blocking_map.pgm")
overall = combined_map(bank, frames[0], frames)
print(f"blocking map cells:\n{image}")
print(f"combined map (0..255):\n{overall}")

# Intensity versus Qp: stubs whose firing set grows with Qp stand in for
# classifiers seeing heavier quantization artifacts. The 128px gradient has
# four grid columns with mean luma ~30/94/158/222, so the rising thresholds
# sweep rates 0.25 -> 1.0.
wide = gradient_frames(128, 32, 10)
reports = []
for qp, threshold in ((22, 50.0), (27, 100.0), (32, 170.0), (37, 230.0)):
    qp_path = work / f"fx{qp}_128x32_30.yuv"
    m = write_fixture_sequence(qp_path,
                               SequenceMeta(name="fx", width=128, height=32, qp=qp),
                               wide)
    reports.append(sequence_intensity(threshold_bank(threshold),
                                      open_sequence(qp_path, m)))
table = qp_report(reports)
print("\nqp table (blocking rows):")
for row in table.rows:
    if row["type"] == "blocking":
        print(f"  qp={row['qp']}: rate {row['rate']:.3f}")
print(f"monotonicity diagnostic: {table.monotonicity}")
print(f"maps written under {work}")
