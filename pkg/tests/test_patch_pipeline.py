import numpy as np
import pytest

from peakit.annotation import RegionMask, union_masks
from peakit.errors import InsufficientReferenceArea, WrongSpanLength
from peakit.patch_pipeline import (
    AffineParams,
    AugmentConfig,
    IDENTITY_AUGMENT,
    LabeledWindow,
    Source,
    apply_affine,
    augment,
    augment_cuboid,
    draw_affine_params,
    label_spatial,
    label_temporal,
    sample_negatives,
    split,
)
from peakit.pea_types import PeaType
from peakit.video_io import PatchPayload


def oracle_labels(bits, size, stride):
    """Double-loop popcount oracle: (x, y) -> positive?"""
    h, w = bits.shape
    out = {}
    for y in range(0, h - size + 1, stride):
        for x in range(0, w - size + 1, stride):
            ones = 0
            for r in range(size):
                for c in range(size):
                    ones += int(bits[y + r, x + c])
            out[(x, y)] = ones >= size * size / 2
    return out


def fast_oracle_labels(bits, size, stride):
    """Same rule, per-window numpy popcount (for larger sweeps)."""
    h, w = bits.shape
    out = {}
    for y in range(0, h - size + 1, stride):
        for x in range(0, w - size + 1, stride):
            out[(x, y)] = int(bits[y:y + size, x:x + size].sum()) >= size * size / 2
    return out


def random_patch(rng, size=32):
    return PatchPayload(
        rng.integers(0, 256, (size, size), dtype=np.uint8),
        rng.integers(0, 256, (size // 2, size // 2), dtype=np.uint8),
        rng.integers(0, 256, (size // 2, size // 2), dtype=np.uint8),
    )


class TestLabelSpatial:
    def test_exactly_half_is_positive(self):
        bits = np.zeros((32, 32), dtype=bool)
        bits.reshape(-1)[:512] = True  # exactly half of 1024
        windows = label_spatial(RegionMask(bits), 32, pea_type=PeaType.RINGING)
        assert len(windows) == 1
        assert windows[0].label == 1
        assert windows[0].source is Source.COMPRESSED_CIRCLED

    def test_one_below_half_is_negative(self):
        bits = np.zeros((32, 32), dtype=bool)
        bits.reshape(-1)[:511] = True
        (w,) = label_spatial(RegionMask(bits), 32, pea_type=PeaType.RINGING)
        assert w.label == 0
        assert w.source is Source.COMPRESSED_UNCIRCLED

    def test_all_zero_mask_every_window_negative(self):
        mask = RegionMask(np.zeros((96, 128), dtype=bool))
        windows = label_spatial(mask, 32, pea_type=PeaType.RINGING)
        assert len(windows) == (128 // 32) * (96 // 32)
        assert all(w.label == 0 for w in windows)

    def test_matches_double_loop_oracle(self, rng):
        bits = rng.random((70, 90)) < 0.5
        windows = label_spatial(RegionMask(bits), 32, 16, pea_type=PeaType.RINGING)
        expected = oracle_labels(bits, 32, 16)
        assert len(windows) == len(expected)
        for w in windows:
            assert (w.label == 1) == expected[(w.x, w.y)], (w.x, w.y)

    def test_random_masks_against_oracle(self, rng):
        for _ in range(10):
            h = int(rng.integers(72, 160))
            w = int(rng.integers(72, 160))
            density = rng.uniform(0.3, 0.7)
            bits = rng.random((h, w)) < density
            for size, t in ((32, PeaType.RINGING), (72, PeaType.BLOCKING)):
                got = label_spatial(RegionMask(bits), size, pea_type=t)
                expected = fast_oracle_labels(bits, size, size)
                assert {(w_.x, w_.y): w_.label == 1 for w_ in got} == expected

    def test_border_windows_dropped(self):
        mask = RegionMask(np.ones((40, 50), dtype=bool))
        windows = label_spatial(mask, 32, pea_type=PeaType.RINGING)
        # only x=0..18 step 32 -> x=0; y likewise
        assert [(w.x, w.y) for w in windows] == [(0, 0)]

    def test_window_size_must_match_type(self):
        mask = RegionMask(np.ones((72, 72), dtype=bool))
        with pytest.raises(ValueError):
            label_spatial(mask, 32, pea_type=PeaType.BLOCKING)


class TestLabelTemporal:
    def test_nine_masks_rejected(self):
        masks = [RegionMask(np.zeros((40, 40), bool)) for _ in range(9)]
        with pytest.raises(WrongSpanLength):
            label_temporal(masks, 32, pea_type=PeaType.FLICKERING)

    def test_region_in_single_frame_marks_cuboid(self):
        masks = [RegionMask(np.zeros((32, 32), bool)) for _ in range(10)]
        masks[0] = RegionMask(np.ones((32, 32), bool))
        (w,) = label_temporal(masks, 32, pea_type=PeaType.FLICKERING, start_frame=4)
        assert w.label == 1
        assert w.frame == 4

    def test_equals_spatial_on_union(self, rng):
        for _ in range(5):
            masks = [RegionMask(rng.random((64, 96)) < 0.12) for _ in range(10)]
            merged = union_masks(masks)
            temporal = label_temporal(masks, 32, pea_type=PeaType.FLICKERING)
            spatial = label_spatial(merged, 32, pea_type=PeaType.FLICKERING)
            assert [(w.x, w.y, w.label) for w in temporal] == \
                   [(w.x, w.y, w.label) for w in spatial]


def negatives(n, size=32, pea_type=PeaType.RINGING):
    return [
        LabeledWindow(x=0, y=0, size=size, frame=i, pea_type=pea_type,
                      label=0, source=Source.COMPRESSED_UNCIRCLED)
        for i in range(n)
    ]


class TestSampleNegatives:
    def test_hundred_at_1_to_2_gives_200(self):
        out = sample_negatives(
            negatives(100), width=416, height=240,
            frame_indices=range(30), seed=7,
        )
        assert len(out) == 200
        assert all(w.source is Source.REFERENCE and w.label == 0 for w in out)

    def test_ratio_1_to_0(self):
        out = sample_negatives(
            negatives(100), width=416, height=240,
            frame_indices=range(30), seed=7, ratio=(1, 0),
        )
        assert out == []

    def test_deterministic_for_seed(self):
        kwargs = dict(width=128, height=96, frame_indices=range(10), seed=42)
        a = sample_negatives(negatives(50), **kwargs)
        b = sample_negatives(negatives(50), **kwargs)
        assert a == b
        c = sample_negatives(negatives(50), width=128, height=96,
                             frame_indices=range(10), seed=43)
        assert a != c

    def test_windows_fully_in_frame_and_even(self):
        out = sample_negatives(
            negatives(40), width=100, height=80, frame_indices=[3], seed=1,
        )
        for w in out:
            assert w.x % 2 == 0 and w.y % 2 == 0
            assert 0 <= w.x <= 100 - 32 and 0 <= w.y <= 80 - 32
            assert w.frame == 3

    def test_insufficient_area(self):
        with pytest.raises(InsufficientReferenceArea):
            sample_negatives(negatives(4), width=20, height=20,
                             frame_indices=[0], seed=0)

    def test_unachievable_target_emits_every_placement(self):
        out = sample_negatives(
            negatives(100), width=34, height=34, frame_indices=[0], seed=0,
        )
        assert len(out) == 4  # x,y in {0,2} with size 32
        assert len({(w.x, w.y) for w in out}) == 4


class TestSplit:
    def test_50000_records_split_37500_12500(self, rng):
        records = [(f"r{i}", int(rng.integers(0, 2))) for i in range(50_000)]
        assignment = split(records, seed=0)
        assert len(assignment.train_ids) == 37_500
        assert len(assignment.test_ids) == 12_500

    def test_four_records_three_one_with_both_classes_in_train(self):
        records = [("a", 1), ("b", 1), ("c", 0), ("d", 0)]
        assignment = split(records, seed=5)
        assert len(assignment.train_ids) == 3
        assert len(assignment.test_ids) == 1
        train_labels = {lab for rid, lab in records if assignment[rid] == "train"}
        assert train_labels == {0, 1}

    def test_per_class_ratio_within_one(self, rng):
        records = [(f"p{i}", 1) for i in range(633)] + [(f"n{i}", 0) for i in range(377)]
        assignment = split(records, seed=3)
        for label, ids in (("p", 633), ("n", 377)):
            test_n = sum(1 for rid in assignment.test_ids if rid.startswith(label))
            assert abs(test_n - ids * 0.25) <= 1

    def test_permutation_invariance(self, rng):
        records = [(f"r{i}", int(rng.integers(0, 2))) for i in range(200)]
        a = split(records, seed=9)
        shuffled = list(records)
        rng.shuffle(shuffled)
        b = split(shuffled, seed=9)
        assert a.assignment == b.assignment

    def test_seed_changes_assignment(self, rng):
        records = [(f"r{i}", i % 2) for i in range(200)]
        a = split(records, seed=1)
        b = split(records, seed=2)
        assert a.assignment != b.assignment

    def test_adding_record_changes_at_most_one_per_class(self, rng):
        records = [(f"r{i}", i % 2) for i in range(101)]
        before = split(records[:-1], seed=4)
        after = split(records, seed=4)
        changed = [rid for rid, _ in records[:-1]
                   if before[rid] != after[rid]]
        assert len(changed) <= 2  # at most one boundary move per class

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            split([("a", 0), ("b", 1), ("c", 0)], seed=0)


class TestAugment:
    def test_zero_config_is_identity(self, rng):
        patch = random_patch(rng)
        out = augment(patch, IDENTITY_AUGMENT, seed=0)
        assert out == patch

    def test_double_flip_restores_patch(self, rng):
        patch = random_patch(rng)
        flip = AffineParams(flip=True)
        once = apply_affine(patch, flip)
        twice = apply_affine(once, flip)
        assert twice == patch
        assert once != patch

    def test_flip_is_exact_mirror(self, rng):
        patch = random_patch(rng)
        out = apply_affine(patch, AffineParams(flip=True))
        assert np.array_equal(out.y, patch.y[:, ::-1])
        assert np.array_equal(out.u, patch.u[:, ::-1])
        assert np.array_equal(out.v, patch.v[:, ::-1])

    def test_rotation_90_on_2x2(self):
        patch = PatchPayload(
            np.array([[1, 2], [3, 4]], dtype=np.uint8),
            np.array([[128]], dtype=np.uint8),
            np.array([[128]], dtype=np.uint8),
        )
        out = apply_affine(patch, AffineParams(rotation=90.0))
        assert np.array_equal(out.y, np.array([[2, 4], [1, 3]]))
        assert np.array_equal(out.y, np.rot90(patch.y))

    def test_rotation_90_matches_rot90_uniformly(self, rng):
        patch = random_patch(rng, size=16)
        out = apply_affine(patch, AffineParams(rotation=90.0))
        assert np.array_equal(out.y, np.rot90(patch.y))

    def test_integer_shift_translates(self, rng):
        patch = random_patch(rng, size=8)
        out = apply_affine(patch, AffineParams(shift_x=2.0), fill_mode="nearest")
        assert np.array_equal(out.y[:, 2:], patch.y[:, :-2])

    def test_constant_fill_value(self, rng):
        patch = random_patch(rng, size=8)
        out = apply_affine(patch, AffineParams(shift_x=4.0), fill_mode="constant", cval=0)
        assert np.all(out.y[:, :4] == 0)

    def test_reflect_fill(self, rng):
        patch = random_patch(rng, size=8)
        out = apply_affine(patch, AffineParams(shift_x=2.0), fill_mode="reflect")
        assert np.array_equal(out.y[:, 0], patch.y[:, 1])
        assert np.array_equal(out.y[:, 1], patch.y[:, 0])

    def test_draw_respects_ranges(self, rng):
        cfg = AugmentConfig(rotation_range=15, width_shift=0.1, height_shift=0.1,
                            shear_range=10, zoom_range=0.1, horizontal_flip=True)
        for _ in range(100):
            p = draw_affine_params(cfg, 32, rng)
            assert abs(p.rotation) <= 15
            assert abs(p.shift_x) <= 3.2 and abs(p.shift_y) <= 3.2
            assert abs(p.shear) <= 10
            assert 0.9 <= p.zoom <= 1.1

    def test_cuboid_shares_one_transform(self, rng):
        frames = [random_patch(rng, 16) for _ in range(10)]
        cfg = AugmentConfig()
        out = augment_cuboid(frames, cfg, seed=3)
        # same seed, single-frame application must equal the cuboid's frame 0
        single = augment(frames[0], cfg, seed=3)
        assert out[0] == single
        assert len(out) == 10

    def test_validation(self):
        with pytest.raises(ValueError):
            AugmentConfig(zoom_range=1.0)
        with pytest.raises(ValueError):
            AugmentConfig(rotation_range=-1)
        with pytest.raises(ValueError):
            AugmentConfig(fill_mode="wrap")
