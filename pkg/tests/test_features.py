"""Beat grouping, measurement oracle checks, morphology, and axis."""

import numpy as np
import pytest

from ecgexam import delineation as dl
from ecgexam import features as ft
from ecgexam.errors import EmptyDelineation, UndefinedAxis
from ecgexam.leads import LEADS
from ecgexam.records import EcgRecord, WaveClass, WaveSegment
from ecgexam.synth import SyntheticSpec, synthesize


def truth_set(result):
    return dl.delineation_from_segments(result.segments, result.record.sampling_rate,
                                        record_id=result.record.id)


def measure_spec(spec):
    result = synthesize(spec)
    grouping = ft.group_beats(truth_set(result))
    return result, grouping, ft.measure(result.record, grouping)


class TestGroupBeats:
    def test_complete_beats(self):
        result = synthesize(SyntheticSpec())
        grouping = ft.group_beats(truth_set(result))
        assert len(grouping.beats) == 10
        assert all(b.p is not None and b.t is not None for b in grouping.beats)
        assert grouping.orphan_p == []

    def test_non_conducted_p_is_orphan(self):
        result = synthesize(SyntheticSpec(dropped_qrs_schedule=(3,)))
        grouping = ft.group_beats(truth_set(result))
        assert len(grouping.beats) == 9
        assert len(grouping.orphan_p) == 1
        for beat in grouping.beats:
            if beat.p is not None:
                assert beat.qrs.onset - beat.p.onset < 50

    def test_qrs_only_record(self):
        segs = []
        for lead in LEADS:
            for k in range(5):
                on = 100 + 100 * k
                segs.append(WaveSegment(WaveClass.QRS, lead, on, on + 9, on + 4))
        dset = dl.delineation_from_segments(segs, 100)
        grouping = ft.group_beats(dset)
        assert len(grouping.beats) == 5
        assert all(b.p is None and b.t is None for b in grouping.beats)

    def test_empty_raises(self):
        dset = dl.DelineationSet(sampling_rate=100, per_lead={}, consensus=[],
                                 provenance=dl.PROVENANCE_ANNOTATION)
        with pytest.raises(EmptyDelineation):
            ft.group_beats(dset)


class TestMeasure:
    def test_intervals_match_spec_within_one_sample(self):
        _, _, m = measure_spec(SyntheticSpec(pr_ms=240.0, qrs_ms=150.0, qt_ms=460.0))
        tol = 10.0  # one sample at 100 Hz
        for b in m.beats:
            assert abs(b.pr_ms - 240.0) <= tol
            assert abs(b.qrs_dur_ms - 150.0) <= tol
            assert abs(b.qt_ms - 460.0) <= tol
        assert m.median_pr_ms == pytest.approx(240.0, abs=tol)

    def test_st_deviation_reference_lead(self):
        _, _, m = measure_spec(SyntheticSpec(st_shift_mv=0.2))
        sts = [b.leads["II"].st_mv for b in m.beats]
        assert np.median(sts) == pytest.approx(0.2, abs=0.01)

    def test_zero_p_amplitude(self):
        _, _, m = measure_spec(SyntheticSpec(p_amp=0.0))
        assert m.beats[2].leads["II"].p_mv == pytest.approx(0.0, abs=1e-6)

    def test_baseline_offset_invariance(self):
        spec = SyntheticSpec(pr_ms=200.0, st_shift_mv=0.1)
        result = synthesize(spec)
        grouping = ft.group_beats(truth_set(result))
        m0 = ft.measure(result.record, grouping)
        shifted = EcgRecord(
            id=result.record.id, sampling_rate=100, leads=LEADS,
            samples=result.record.samples + np.float32(0.37),
        )
        m1 = ft.measure(shifted, grouping)
        b0, b1 = m0.beats[3], m1.beats[3]
        assert b1.leads["II"].r_mv == pytest.approx(b0.leads["II"].r_mv, abs=1e-3)
        assert b1.leads["II"].st_mv == pytest.approx(b0.leads["II"].st_mv, abs=1e-3)
        assert b1.axis_deg == pytest.approx(b0.axis_deg, abs=0.1)

    def test_rr_defined_from_second_beat(self):
        _, _, m = measure_spec(SyntheticSpec())
        assert m.beats[0].rr_ms is None
        assert all(b.rr_ms is not None for b in m.beats[1:])

    def test_qt_below_rr_for_normal_beats(self):
        _, _, m = measure_spec(SyntheticSpec())
        for b in m.beats[1:]:
            assert b.qt_ms < b.rr_ms


class TestMorphology:
    def lead_m(self, spec, lead, beat=1):
        _, _, m = measure_spec(spec)
        return m.beats[beat].leads[lead]

    def test_rsr_prime_pattern(self):
        lm = self.lead_m(
            SyntheticSpec(qrs_ms=140.0, qt_ms=480.0,
                          lead_overrides={"V1": {"q_amp": 0, "r_amp": 0.4,
                                                  "s_amp": 0.3, "r_prime_amp": 0.9}}),
            "V1",
        )
        assert lm.morphology == "RSR'"
        labels = [d.label for d in lm.deflections]
        assert labels == ["R", "S", "R'"]

    def test_single_positive_lobe_monophasic(self):
        lm = self.lead_m(SyntheticSpec(), "II")
        assert lm.morphology == "R-monophasic"
        assert lm.notched_r is False

    def test_pathological_q_by_duration(self):
        # 45 ms Q at 100 Hz needs a wide QRS so the Q lobe spans >= 40 ms.
        spec = SyntheticSpec(qrs_ms=140.0, qt_ms=480.0, q_amp=0.15)
        lm = self.lead_m(spec, "II")
        assert lm.q_dur_ms >= 40.0
        assert lm.pathological_q is True

    def test_pathological_q_by_depth_ratio(self):
        spec = SyntheticSpec(lead_overrides={"V4": {"q_amp": 0.35}})
        lm = self.lead_m(spec, "V4")
        assert lm.q_dur_ms < 40.0
        assert abs(lm.q_mv) >= 0.25 * lm.r_mv
        assert lm.pathological_q is True

    def test_small_q_not_pathological(self):
        lm = self.lead_m(SyntheticSpec(q_amp=0.1), "II")
        assert lm.morphology == "qR"
        assert lm.pathological_q is False

    def test_notch_detection_and_threshold(self):
        lm = self.lead_m(SyntheticSpec(qrs_ms=140.0, qt_ms=480.0, notch_depth=0.18), "II")
        assert lm.notched_r is True
        shallow = self.lead_m(SyntheticSpec(qrs_ms=140.0, qt_ms=480.0, notch_depth=0.03), "II")
        assert shallow.notched_r is False

    def test_classify_morphology_public_op(self):
        result = synthesize(SyntheticSpec(q_amp=0.1))
        grouping = ft.group_beats(truth_set(result))
        morph, notched, patho = ft.classify_morphology(result.record, grouping.beats[1], "II")
        assert morph == "qR"
        assert notched is False
        assert patho is False

    def test_qs_pattern_in_v1(self):
        lm = self.lead_m(SyntheticSpec(), "V1")
        assert lm.morphology == "QS"
        assert lm.dominant_s is True


class TestAxis:
    def test_axis_zero(self):
        assert ft.frontal_axis(1.0, 0.0) == pytest.approx(0.0, abs=1e-9)

    def test_axis_ninety(self):
        assert ft.frontal_axis(0.0, 1.0) == pytest.approx(90.0, abs=1e-9)

    def test_axis_forty_five(self):
        assert ft.frontal_axis(0.5, 0.5) == pytest.approx(45.0, abs=1e-9)

    def test_undefined_axis(self):
        with pytest.raises(UndefinedAxis):
            ft.frontal_axis(1e-6, -1e-6)

    def test_range_convention(self):
        assert ft.frontal_axis(-1.0, 0.0) == pytest.approx(180.0)
        assert ft.frontal_axis(0.0, -1.0) == pytest.approx(-90.0)

    @pytest.mark.parametrize("axis", [0.0, 90.0, 45.0, -60.0, 120.0])
    def test_measured_axis_matches_spec(self, axis):
        _, _, m = measure_spec(SyntheticSpec(axis_deg=axis))
        assert m.median_axis_deg == pytest.approx(axis, abs=0.5)

    def test_gain_invariance(self):
        spec = SyntheticSpec(axis_deg=30.0)
        result = synthesize(spec)
        grouping = ft.group_beats(truth_set(result))
        m0 = ft.measure(result.record, grouping)
        scaled = EcgRecord(
            id=result.record.id, sampling_rate=100, leads=LEADS,
            samples=result.record.samples * np.float32(2.5),
        )
        m1 = ft.measure(scaled, grouping)
        assert m1.median_axis_deg == pytest.approx(m0.median_axis_deg, abs=0.1)
