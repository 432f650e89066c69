import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peakit.annotation import (
    EllipseAnnotation,
    RegionMask,
    TemporalMark,
    load_session,
    masks_for_frame,
    rasterize,
    save_session,
    union_masks,
    vote_masks,
)
from peakit.errors import DimensionMismatch, ParseError
from peakit.pea_types import PeaType


def brute_force_rasterize(ann, width, height):
    """Independent per-pixel evaluation of the pixel-center rule."""
    bits = np.zeros((height, width), dtype=bool)
    for py in range(height):
        for px in range(width):
            dx = (px + 0.5 - ann.cx) / ann.rx
            dy = (py + 0.5 - ann.cy) / ann.ry
            bits[py, px] = dx * dx + dy * dy <= 1.0
    return bits


def ellipse(cx=10, cy=10, rx=5, ry=5, pea_type=PeaType.BLOCKING, frame=0,
            temporal=False, sequence="seq", subject="s1"):
    return EllipseAnnotation(
        sequence=sequence, frame=frame, pea_type=pea_type,
        cx=cx, cy=cy, rx=rx, ry=ry, subject_id=subject, temporal=temporal,
    )


class TestInvariants:
    def test_semi_axes_positive(self):
        with pytest.raises(ValueError):
            ellipse(rx=0)
        with pytest.raises(ValueError):
            ellipse(ry=-1)

    def test_temporal_needs_temporal_type(self):
        with pytest.raises(ValueError):
            ellipse(pea_type=PeaType.BLOCKING, temporal=True)
        ellipse(pea_type=PeaType.FLICKERING, temporal=True)

    def test_temporal_mark_span(self):
        mark = TemporalMark(ellipse(pea_type=PeaType.FLOATING, frame=5, temporal=True))
        assert mark.start_frame == 5
        assert list(mark.frames) == list(range(5, 15))
        with pytest.raises(ValueError):
            mark.validate_against(100, 100, frame_count=12)
        mark.validate_against(100, 100, frame_count=15)

    def test_center_inside_frame(self):
        ann = ellipse(cx=500, cy=10)
        with pytest.raises(ValueError):
            ann.validate_against(416, 240)


class TestRasterize:
    def test_huge_ellipse_covers_frame(self):
        ann = ellipse(cx=208, cy=120, rx=10000, ry=10000)
        mask = rasterize(ann, 416, 240)
        assert mask.area == 416 * 240

    def test_tiny_ellipse_sets_single_pixel(self):
        ann = ellipse(cx=10.5, cy=10.5, rx=0.4, ry=0.4)
        mask = rasterize(ann, 32, 32)
        assert mask.area == 1
        assert mask.bits[10, 10]

    def test_random_ellipses_match_brute_force(self, rng):
        for _ in range(40):
            w = int(rng.integers(8, 48))
            h = int(rng.integers(8, 40))
            ann = ellipse(
                cx=float(rng.uniform(0, w)), cy=float(rng.uniform(0, h)),
                rx=float(rng.uniform(0.2, w)), ry=float(rng.uniform(0.2, h)),
            )
            mask = rasterize(ann, w, h)
            assert np.array_equal(mask.bits, brute_force_rasterize(ann, w, h))

    def test_off_frame_extent_clips(self):
        ann = ellipse(cx=0, cy=0, rx=10, ry=10)
        mask = rasterize(ann, 16, 16)
        assert 0 < mask.area < 16 * 16

    def test_area_monotone_in_semi_axes(self, rng):
        for _ in range(20):
            ann = ellipse(
                cx=float(rng.uniform(0, 32)), cy=float(rng.uniform(0, 32)),
                rx=float(rng.uniform(0.3, 20)), ry=float(rng.uniform(0.3, 20)),
            )
            grown = ellipse(cx=ann.cx, cy=ann.cy, rx=ann.rx * 1.3, ry=ann.ry)
            small = rasterize(ann, 32, 32).bits
            big = rasterize(grown, 32, 32).bits
            assert np.all(big | ~small)  # growing never clears a set pixel


class TestUnion:
    def test_mask_and_complement(self):
        bits = np.random.default_rng(0).random((20, 30)) < 0.5
        a = RegionMask(bits)
        b = RegionMask(~bits)
        assert union_masks([a, b]).area == 20 * 30

    def test_empty_union_needs_dims(self):
        mask = union_masks([], width=10, height=8)
        assert mask.area == 0 and mask.width == 10 and mask.height == 8
        with pytest.raises(DimensionMismatch):
            union_masks([])

    def test_union_equals_per_pixel_or(self, rng):
        a = RegionMask(rng.random((15, 17)) < 0.4)
        b = RegionMask(rng.random((15, 17)) < 0.4)
        merged = union_masks([a, b])
        for r in range(15):
            for c in range(17):
                assert merged.bits[r, c] == (a.bits[r, c] or b.bits[r, c])

    def test_commutative_associative_idempotent(self, rng):
        ms = [RegionMask(rng.random((9, 9)) < 0.5) for _ in range(3)]
        assert union_masks(ms) == union_masks(ms[::-1])
        left = union_masks([union_masks(ms[:2]), ms[2]])
        right = union_masks([ms[0], union_masks(ms[1:])])
        assert left == right
        assert union_masks([ms[0], ms[0]]) == union_masks([ms[0]])

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            union_masks([RegionMask(np.zeros((4, 4), bool)),
                         RegionMask(np.zeros((4, 6), bool))])

    def test_vote_masks(self, rng):
        ms = [RegionMask(rng.random((8, 8)) < 0.5) for _ in range(3)]
        votes = vote_masks(ms, 2)
        counts = sum(m.bits.astype(int) for m in ms)
        assert np.array_equal(votes.bits, counts >= 2)
        assert vote_masks(ms, 1) == union_masks(ms)


ann_strategy = st.builds(
    EllipseAnnotation,
    sequence=st.sampled_from(["BQMall", "Traffic", "clip_01"]),
    frame=st.integers(0, 500),
    pea_type=st.sampled_from(list(PeaType)),
    cx=st.floats(0, 400, allow_nan=False),
    cy=st.floats(0, 200, allow_nan=False),
    rx=st.floats(0.1, 100, allow_nan=False, exclude_min=True),
    ry=st.floats(0.1, 100, allow_nan=False, exclude_min=True),
    subject_id=st.sampled_from(["s01", "s29", "anon"]),
    temporal=st.just(False),
)


class TestSession:
    def test_empty_round_trip(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        save_session([], path)
        assert load_session(path) == []

    def test_thousand_random_round_trip(self, tmp_path, rng):
        anns = []
        for i in range(1000):
            t = PeaType(int(rng.integers(0, 6)))
            anns.append(EllipseAnnotation(
                sequence=f"seq{int(rng.integers(0, 5))}",
                frame=int(rng.integers(0, 300)),
                pea_type=t,
                cx=float(rng.uniform(0, 400)), cy=float(rng.uniform(0, 200)),
                rx=float(rng.uniform(0.5, 60)), ry=float(rng.uniform(0.5, 60)),
                subject_id=f"s{int(rng.integers(1, 31)):02d}",
                temporal=bool(rng.integers(0, 2)) if t.is_temporal else False,
            ))
        path = tmp_path / "big.jsonl"
        save_session(anns, path)
        assert load_session(path) == anns

    @settings(max_examples=50, deadline=None)
    @given(anns=st.lists(ann_strategy, max_size=8))
    def test_round_trip_property(self, anns, tmp_path_factory):
        path = tmp_path_factory.mktemp("sess") / "s.jsonl"
        save_session(anns, path)
        assert load_session(path) == anns

    def test_zero_rx_parse_error_names_invariant(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        record = dict(sequence="a", frame=0, pea_type="blocking", cx=1, cy=1,
                      rx=0, ry=5, subject_id="s", temporal=False)
        path.write_text(json.dumps(record) + "\n")
        with pytest.raises(ParseError) as exc:
            load_session(path)
        assert "rx" in str(exc.value)
        assert exc.value.line == 1

    def test_bad_json_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = json.dumps(ellipse().to_wire())
        path.write_text(good + "\n{oops\n")
        with pytest.raises(ParseError) as exc:
            load_session(path)
        assert exc.value.line == 2

    def test_unknown_pea_type(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        record = dict(sequence="a", frame=0, pea_type="vignetting", cx=1, cy=1,
                      rx=2, ry=5, subject_id="s", temporal=False)
        path.write_text(json.dumps(record) + "\n")
        with pytest.raises(ParseError) as exc:
            load_session(path)
        assert "pea_type" in str(exc.value)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        record = dict(sequence="a", frame=0, pea_type="blocking", cx=1, cy=1,
                      rx=2, ry=5)
        path.write_text(json.dumps(record) + "\n")
        with pytest.raises(ParseError) as exc:
            load_session(path)
        assert "subject_id" in str(exc.value)


class TestMasksForFrame:
    def test_union_over_subjects_and_temporal_span(self):
        anns = [
            ellipse(cx=5, cy=5, rx=3, ry=3, subject="s1"),
            ellipse(cx=25, cy=5, rx=3, ry=3, subject="s2"),
            ellipse(cx=15, cy=25, rx=3, ry=3, pea_type=PeaType.FLICKERING,
                    frame=2, temporal=True),
            ellipse(cx=5, cy=25, rx=3, ry=3, pea_type=PeaType.RINGING),
        ]
        blocking = masks_for_frame(anns, "seq", 0, PeaType.BLOCKING, 32, 32)
        expected = union_masks([rasterize(anns[0], 32, 32), rasterize(anns[1], 32, 32)])
        assert blocking == expected
        # the temporal flicker mark covers frames 2..11
        flick_5 = masks_for_frame(anns, "seq", 5, PeaType.FLICKERING, 32, 32)
        assert flick_5 == rasterize(anns[2], 32, 32)
        assert masks_for_frame(anns, "seq", 12, PeaType.FLICKERING, 32, 32).area == 0
