"""Tolerance-based segmentation scoring."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecgexam import delineation as dl
from ecgexam.records import WaveClass, WaveSegment
from ecgexam.synth import SyntheticSpec, synthesize


def single_lead_set(boundaries, rate=1000, lead="II", width=40):
    """One QRS segment per (onset) entry on one lead."""
    segs = [
        WaveSegment(WaveClass.QRS, lead, on, on + width, on + width // 2)
        for on in boundaries
    ]
    return dl.DelineationSet(
        sampling_rate=rate,
        per_lead={lead: segs},
        consensus=[],
        provenance=dl.PROVENANCE_ANNOTATION,
    )


class TestScorer:
    def test_identity_perfect_scores(self):
        result = synthesize(SyntheticSpec())
        dset = dl.delineation_from_segments(result.segments, 100)
        score = dl.score_segmentation(dset, dset)
        for cls in WaveClass:
            for kind in ("onset", "offset"):
                sc = score.score(cls, kind)
                assert sc.recall == 1.0 and sc.precision == 1.0 and sc.fn == sc.fp == 0

    @pytest.mark.parametrize("shift_ms,tp_expected", [(0, 1), (140, 1), (150, 1), (151, 0)])
    def test_tolerance_boundary(self, shift_ms, tp_expected):
        ref = single_lead_set([1000])
        pred = single_lead_set([1000 + shift_ms])  # 1 kHz: samples == ms
        score = dl.score_segmentation(pred, ref, tolerance_ms=150.0)
        sc = score.score(WaveClass.QRS, "onset")
        assert sc.tp == tp_expected
        assert sc.fn == 1 - tp_expected
        assert sc.fp == 1 - tp_expected

    def test_recall_precision_swap_under_exchange(self):
        ref = single_lead_set([1000, 2000, 3000])
        pred = single_lead_set([1010, 2900])  # one match, one miss, asymmetric
        fwd = dl.score_segmentation(pred, ref)
        rev = dl.score_segmentation(ref, pred)
        for cls in WaveClass:
            for kind in ("onset", "offset"):
                a, b = fwd.score(cls, kind), rev.score(cls, kind)
                assert a.recall == b.precision
                assert a.precision == b.recall
                assert (a.tp, a.fn, a.fp) == (b.tp, b.fp, b.fn)

    def test_one_to_one_matching(self):
        # Two predictions near one reference: only one TP, one FP.
        ref = single_lead_set([1000])
        pred = single_lead_set([990, 1060])
        sc = dl.score_segmentation(pred, ref).score(WaveClass.QRS, "onset")
        assert (sc.tp, sc.fn, sc.fp) == (1, 0, 1)

    def test_nearest_first_assignment(self):
        # Prediction at 1040 is closest to ref 1000; 1260 pairs with 1300.
        ref = single_lead_set([1000, 1300])
        pred = single_lead_set([1040, 1260])
        sc = dl.score_segmentation(pred, ref).score(WaveClass.QRS, "onset")
        assert sc.tp == 2

    def test_rate_mismatch_rejected(self):
        with pytest.raises(ValueError):
            dl.score_segmentation(single_lead_set([100], rate=100), single_lead_set([100], rate=500))

    def test_table_renders(self):
        score = dl.score_segmentation(single_lead_set([1000]), single_lead_set([1000]))
        table = score.to_table()
        assert "QRS onset" in table and "overall" in table

    @settings(max_examples=30, deadline=None)
    @given(
        ref=st.lists(st.integers(0, 50), max_size=6),
        pred=st.lists(st.integers(0, 50), max_size=6),
    )
    def test_swap_symmetry_property(self, ref, pred):
        ref_b = sorted(set(r * 400 for r in ref))
        pred_b = sorted(set(p * 400 + 7 for p in pred))
        a = dl.score_segmentation(single_lead_set(pred_b), single_lead_set(ref_b))
        b = dl.score_segmentation(single_lead_set(ref_b), single_lead_set(pred_b))
        for kind in ("onset", "offset"):
            x, y = a.score(WaveClass.QRS, kind), b.score(WaveClass.QRS, kind)
            assert (x.tp, x.fn, x.fp) == (y.tp, y.fp, y.fn)

    def test_end_to_end_ideal_map_scores_perfectly(self):
        from ecgexam.pipeline import delineate_from_map
        from ecgexam.synth import ideal_probability_map

        result = synthesize(SyntheticSpec(dropped_qrs_schedule=(4,), pr_ms=200.0))
        dmap = ideal_probability_map(result.record, result.segments)
        predicted = delineate_from_map(result.record, dmap)
        truth = dl.delineation_from_segments(result.segments, result.record.sampling_rate)
        score = dl.score_segmentation(predicted, truth, tolerance_ms=150.0)
        overall = score.overall()
        assert overall.recall == 1.0 and overall.precision == 1.0

    def test_counts_accumulate_across_leads(self):
        ref_segs = [
            WaveSegment(WaveClass.QRS, "I", 100, 140, 120),
            WaveSegment(WaveClass.QRS, "II", 100, 140, 120),
        ]
        pred_segs = [WaveSegment(WaveClass.QRS, "I", 100, 140, 120)]
        kwargs = dict(sampling_rate=1000, consensus=[], provenance=dl.PROVENANCE_ANNOTATION)
        ref = dl.DelineationSet(per_lead={"I": [ref_segs[0]], "II": [ref_segs[1]]}, **kwargs)
        pred = dl.DelineationSet(per_lead={"I": pred_segs}, **kwargs)
        sc = dl.score_segmentation(pred, ref).score(WaveClass.QRS, "onset")
        assert (sc.tp, sc.fn, sc.fp) == (1, 1, 0)
