import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecgexam.errors import FormatError
from ecgexam.leads import LEADS
from ecgexam.records import (
    DelineationMap,
    EcgRecord,
    WaveClass,
    WaveSegment,
    read_annotations,
    read_probability_map,
    read_record,
    write_annotations,
    write_probability_map,
    write_record,
)


def make_record(n=1000, rate=100, rec_id="rec", fill=0.0):
    samples = np.full((12, n), fill, dtype=np.float32)
    return EcgRecord(id=rec_id, sampling_rate=rate, leads=LEADS, samples=samples)


class TestEcgRecord:
    def test_duration_arithmetic(self):
        rec = make_record(n=1000, rate=100)
        assert rec.duration_s == 10.0
        assert rec.n_samples == rec.sampling_rate * rec.duration_s

    def test_rejects_wrong_lead_count(self):
        with pytest.raises(FormatError):
            EcgRecord(id="x", sampling_rate=100, leads=LEADS[:11], samples=np.zeros((11, 10)))

    def test_rejects_noncanonical_order(self):
        shuffled = tuple(reversed(LEADS))
        with pytest.raises(FormatError):
            EcgRecord(id="x", sampling_rate=100, leads=shuffled, samples=np.zeros((12, 10)))

    def test_rejects_bad_rate(self):
        with pytest.raises(FormatError):
            EcgRecord(id="x", sampling_rate=0, leads=LEADS, samples=np.zeros((12, 10)))

    def test_samples_immutable(self):
        rec = make_record()
        with pytest.raises(ValueError):
            rec.samples[0, 0] = 1.0


class TestRecordIO:
    def test_csv_well_formed(self, tmp_path):
        rec = make_record(n=1000, rate=100, rec_id="csv1")
        path = tmp_path / "r.csv"
        write_record(rec, path, format="csv")
        back = read_record(path, format="csv")
        assert back.id == "csv1"
        assert back.duration_s == 10.0

    def test_eleven_lead_file_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "id,x\nsampling_rate,100\nlead," + ",".join(LEADS[:11]) + "\n" + ",".join(["0"] * 11) + "\n"
        )
        with pytest.raises(FormatError):
            read_record(path, format="csv")

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text(
            "id,x\nsampling_rate,100\nlead," + ",".join(LEADS) + "\n" + ",".join(["0"] * 7) + "\n"
        )
        with pytest.raises(FormatError, match="row 4"):
            read_record(path, format="csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(IOError):
            read_record(tmp_path / "absent.csv")

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), rate=st.sampled_from([50, 100, 500]))
    def test_round_trip_bit_identical(self, seed, rate, tmp_path_factory):
        rng = np.random.default_rng(seed)
        samples = rng.normal(0, 1, size=(12, 40)).astype(np.float32)
        rec = EcgRecord(id=f"rt{seed}", sampling_rate=rate, leads=LEADS, samples=samples)
        tmp = tmp_path_factory.mktemp("rt")
        for fmt, ext in (("csv", "csv"), ("packed-binary", "ecgb")):
            path = tmp / f"r.{ext}"
            write_record(rec, path, format=fmt)
            back = read_record(path, format=fmt)
            assert back.sampling_rate == rec.sampling_rate
            assert np.array_equal(
                back.samples.view(np.uint32), rec.samples.view(np.uint32)
            ), fmt

    def test_binary_truncated_payload(self, tmp_path):
        rec = make_record(n=10)
        path = tmp_path / "r.ecgb"
        write_record(rec, path, format="packed-binary")
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(FormatError, match="payload"):
            read_record(path, format="packed-binary")


class TestWaveSegment:
    def test_ordering_invariant(self):
        with pytest.raises(ValueError):
            WaveSegment(WaveClass.P, "II", onset=10, offset=5, peak=7)
        with pytest.raises(ValueError):
            WaveSegment(WaveClass.P, "II", onset=10, offset=20, peak=25)

    def test_unknown_lead(self):
        with pytest.raises(ValueError):
            WaveSegment(WaveClass.P, "X9", onset=0, offset=5, peak=2)

    def test_annotation_round_trip(self, tmp_path):
        segs = [
            WaveSegment(WaveClass.P, "II", 10, 18, 14),
            WaveSegment(WaveClass.QRS, "II", 24, 32, 28),
        ]
        path = tmp_path / "ann.json"
        write_annotations(segs, path)
        assert read_annotations(path) == segs

    def test_annotation_wrapped_object_form(self, tmp_path):
        import json

        path = tmp_path / "ann.json"
        path.write_text(json.dumps({
            "record_id": "x",
            "segments": [{"lead": "II", "class": "P", "onset": 5, "offset": 9, "peak": 7}],
        }))
        segs = read_annotations(path)
        assert segs == [WaveSegment(WaveClass.P, "II", 5, 9, 7)]

    def test_malformed_annotation_entry(self, tmp_path):
        path = tmp_path / "ann.json"
        path.write_text('[{"lead": "II", "class": "P"}]')
        with pytest.raises(FormatError):
            read_annotations(path)


class TestDelineationMap:
    def test_rows_must_sum_to_one(self):
        probs = np.zeros((12, 5, 4), dtype=np.float32)
        with pytest.raises(FormatError, match="sum to 1"):
            DelineationMap(probs=probs)

    def test_map_file_round_trip(self, tmp_path):
        probs = np.zeros((12, 8, 4), dtype=np.float32)
        probs[:, :, 3] = 1.0
        probs[0, 2:5, 0] = 1.0
        probs[0, 2:5, 3] = 0.0
        dmap = DelineationMap(probs=probs)
        path = tmp_path / "m.ecgmap"
        write_probability_map(dmap, "rec9", path)
        rec_id, back = read_probability_map(path)
        assert rec_id == "rec9"
        assert np.array_equal(back.probs, dmap.probs)
