import numpy as np
import pytest

from peakit.dataset_store import (
    QP_REFERENCE,
    DatasetStore,
    PatchRecord,
    payload_length,
    read_record_from,
)
from peakit.errors import CorruptRecord, PayloadLengthMismatch
from peakit.pea_types import PeaType


def make_record(rng, pea_type=PeaType.RINGING, label=1, qp=32, sequence="BQMall",
                frame=7, x=64, y=32):
    size = pea_type.window_size
    n_frames = pea_type.n_frames
    payload = rng.integers(0, 256, payload_length(size, n_frames), dtype=np.uint8).tobytes()
    return PatchRecord(
        pea_type=pea_type, label=label, size=size, n_frames=n_frames, qp=qp,
        sequence=sequence, frame_number=frame, x=x, y=y, payload=payload,
    )


class TestPatchRecord:
    def test_32_single_frame_payload_is_1536(self):
        assert payload_length(32, 1) == 1536  # 1024 + 256 + 256

    def test_72_ten_frame_payload_is_77760(self):
        assert payload_length(72, 10) == 77_760  # 10 * (5184 + 1296 + 1296)

    def test_payload_mismatch_rejected(self):
        with pytest.raises(PayloadLengthMismatch):
            PatchRecord(
                pea_type=PeaType.RINGING, label=0, size=32, n_frames=1, qp=32,
                sequence="s", frame_number=0, x=0, y=0, payload=b"\0" * 100,
            )

    def test_size_must_match_type(self, rng):
        payload = b"\0" * payload_length(32, 1)
        with pytest.raises(ValueError):
            PatchRecord(
                pea_type=PeaType.BLOCKING, label=0, size=32, n_frames=1, qp=32,
                sequence="s", frame_number=0, x=0, y=0, payload=payload,
            )

    def test_temporal_needs_ten_frames(self):
        payload = b"\0" * payload_length(32, 1)
        with pytest.raises(ValueError):
            PatchRecord(
                pea_type=PeaType.FLICKERING, label=0, size=32, n_frames=1, qp=32,
                sequence="s", frame_number=0, x=0, y=0, payload=payload,
            )

    def test_qp_sentinel(self, rng):
        make_record(rng, qp=QP_REFERENCE)
        with pytest.raises(ValueError):
            make_record(rng, qp=77)


class TestRoundTrip:
    def test_write_read_bit_exact(self, tmp_path, rng):
        store = DatasetStore(tmp_path / "ds.bin")
        record = make_record(rng)
        offset = store.append(record)
        back = store.read(offset)
        assert back == record
        assert back.payload == record.payload

    def test_randomized_records_round_trip(self, tmp_path, rng):
        store = DatasetStore(tmp_path / "ds.bin")
        records = []
        for _ in range(60):
            t = PeaType(int(rng.integers(0, 6)))
            records.append(make_record(
                rng, pea_type=t, label=int(rng.integers(0, 2)),
                qp=int(rng.choice([22, 27, 32, 37, QP_REFERENCE])),
                sequence=f"seq_{int(rng.integers(0, 4))}",
                frame=int(rng.integers(0, 600)),
                x=int(rng.integers(0, 2000)), y=int(rng.integers(0, 1400)),
            ))
        offsets = [store.append(r) for r in records]
        for off, rec in zip(offsets, records):
            assert store.read(off) == rec

    def test_reopen_preserves_offsets(self, tmp_path, rng):
        path = tmp_path / "ds.bin"
        store = DatasetStore(path)
        r1 = make_record(rng, frame=1)
        off1 = store.append(r1)
        store.close()
        store = DatasetStore(path)
        r2 = make_record(rng, frame=2)
        off2 = store.append(r2)
        assert off2 > off1
        assert store.read(off1) == r1
        assert store.read(off2) == r2

    def test_truncated_payload_corrupt(self, tmp_path, rng):
        path = tmp_path / "ds.bin"
        store = DatasetStore(path)
        store.append(make_record(rng))
        store.close()
        data = path.read_bytes()
        path.write_bytes(data[:-10])
        with open(path, "rb") as fh:
            with pytest.raises(CorruptRecord):
                read_record_from(fh)

    def test_bad_magic(self, tmp_path, rng):
        path = tmp_path / "ds.bin"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with open(path, "rb") as fh:
            with pytest.raises(CorruptRecord):
                read_record_from(fh)


class TestLookup:
    def test_empty_store(self, tmp_path):
        store = DatasetStore(tmp_path / "ds.bin")
        assert store.lookup("a", 0, 0, 0) == []

    def test_three_types_at_same_position(self, tmp_path, rng):
        store = DatasetStore(tmp_path / "ds.bin")
        types = [PeaType.RINGING, PeaType.COLOR_BLEEDING, PeaType.FLICKERING]
        written = [make_record(rng, pea_type=t, frame=9, x=96, y=64) for t in types]
        for r in written:
            store.append(r)
        found = store.lookup("BQMall", 9, 96, 64)
        assert sorted(r.pea_type for r in found) == sorted(types)
        assert {r.payload for r in found} == {r.payload for r in written}

    def test_off_by_one_misses(self, tmp_path, rng):
        store = DatasetStore(tmp_path / "ds.bin")
        store.append(make_record(rng, x=96))
        assert store.lookup("BQMall", 7, 97, 32) == []


class TestStats:
    def test_counts_match_oracle(self, tmp_path, rng):
        store = DatasetStore(tmp_path / "ds.bin")
        expected = {}
        for i in range(40):
            t = PeaType(int(rng.integers(0, 6)))
            label = int(rng.integers(0, 2))
            store.append(make_record(rng, pea_type=t, label=label, frame=i))
            expected[(t, label)] = expected.get((t, label), 0) + 1
        assert store.stats() == expected
        # oracle: full record scan
        scanned = {}
        for _, rec in store:
            scanned[(rec.pea_type, rec.label)] = scanned.get((rec.pea_type, rec.label), 0) + 1
        assert scanned == expected

    def test_empty_store_all_zero(self, tmp_path):
        assert DatasetStore(tmp_path / "ds.bin").stats() == {}

    def test_single_append_increments_once(self, tmp_path, rng):
        store = DatasetStore(tmp_path / "ds.bin")
        store.append(make_record(rng, pea_type=PeaType.BLOCKING, label=0))
        before = store.stats()
        store.append(make_record(rng, pea_type=PeaType.BLOCKING, label=0, frame=8))
        after = store.stats()
        assert after[(PeaType.BLOCKING, 0)] == before[(PeaType.BLOCKING, 0)] + 1
        assert sum(after.values()) == sum(before.values()) + 1


class TestSplits:
    def test_assign_and_load_by_split(self, tmp_path, rng):
        store = DatasetStore(tmp_path / "ds.bin")
        recs = [make_record(rng, frame=i, label=i % 2) for i in range(8)]
        for r in recs:
            store.append(r)
        assignment = {r.record_id: ("train" if i % 4 else "test")
                      for i, r in enumerate(recs)}
        store.assign_splits(assignment)
        rows = store.manifest_rows()
        tags = [row.split for row in rows]
        assert tags.count("test") == 2
        assert tags.count("train") == 6
