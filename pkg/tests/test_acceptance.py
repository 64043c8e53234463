"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion with its measured numbers and runtime.
"""

import json
import time

import pytest

from ecgexam import benchgen as bg
from ecgexam import cli
from ecgexam import delineation as dl
from ecgexam import features as ft
from ecgexam import harness as hz
from ecgexam.diagnosis import NEGATIVE, POSITIVE, DiagnosisResult, parse_diagrams, paths_by_sign
from ecgexam.records import WaveClass, WaveSegment
from ecgexam.synth import SyntheticSpec, ideal_probability_map, synthesize
from ecgexam.pipeline import analyze_record, delineate_from_map
from ecgexam.presets import PRESETS
from tests.conftest import analyze_spec
from tests.test_delineation import rect_candidate_record


def _report(n, detail):
    print(f"\nACCEPTANCE {n}: PASS - {detail}")


@pytest.fixture(scope="module")
def case_pool(catalog, diagrams):
    """Mixed positive/negative cases across all 17 diagnoses from the preset pool."""
    candidates = []
    analyses = {}
    for preset in PRESETS:
        for seed in (0, 1):
            spec = preset.spec(seed)
            _, analysis = analyze_spec(spec, catalog, diagrams)
            analyses[analysis.record_id] = analysis
            for dx, result in analysis.results.items():
                candidates.append(bg.CaseCandidate(record_id=analysis.record_id, result=result))
    outcome = bg.stratified_sample(candidates, bg.SamplingPlan(target_count=2), diagrams, seed=17)
    cases = []
    for cand in outcome.selected:
        analysis = analyses[cand.record_id]
        cases.append(
            bg.build_case(analysis.context(), analysis.findings, cand.result, catalog,
                          seed=17, display_name=diagrams[cand.diagnosis_id].display_name)
        )
    return cases


def test_criterion_01_depth_golden(catalog, diagrams):
    """Scripted mock on the 4-loop CLBBB case gives depths (2.5, 4.0, 1.0, 2.0)."""
    start = time.monotonic()
    spec = SyntheticSpec(qrs_ms=140.0, qt_ms=480.0, r_amp=1.2, notch_depth=0.18,
                         record_id="acc1-clbbb")
    _, analysis = analyze_spec(spec, catalog, diagrams)
    case = bg.build_case(analysis.context(), analysis.findings, analysis.results["CLBBB"],
                         catalog, seed=1, display_name=diagrams["CLBBB"].display_name)
    n_sub = [len([t for t in case.loop_turns(i) if t.step.startswith("GROUND_")])
             for i in range(1, 5)]
    assert n_sub == [2, 1, 2, 2]
    model = hz.PatternModel({
        (1, "ground_measurement"): True,   # wrong value range in loop 1
        (3, "identify"): True,             # claims the finding absent in loop 3
        (4, "ground_lead"): True,          # wrong leads in loop 4
    })
    transcript = hz.run_session(case, model)
    assert transcript.loop_depths == [2.5, 4.0, 1.0, 2.0]
    report = hz.compute_metrics([transcript])
    assert report.depth == 2.375
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    _report(1, f"loop depths (2.5, 4.0, 1.0, 2.0), Depth micro-average 2.375 exactly "
               f"({elapsed:.2f}s)")


def test_criterion_02_metric_extremes(case_pool):
    """Perfect mock: all rates 100 and Depth 4.000; always-wrong mock: all zero."""
    assert len(case_pool) >= 50, f"need >= 50 mixed cases, have {len(case_pool)}"
    polarities = {c.polarity for c in case_pool}
    diagnoses = {c.diagnosis_id for c in case_pool}
    assert polarities == {"+", "-"} and len(diagnoses) == 17
    start = time.monotonic()
    perfect = hz.compute_metrics([hz.run_session(c, hz.PerfectModel()) for c in case_pool])
    wrong = hz.compute_metrics([hz.run_session(c, hz.AlwaysWrongModel()) for c in case_pool])
    elapsed = time.monotonic() - start
    assert (perfect.ida_pct, perfect.completion_pct, perfect.gt_rda_pct) == (100.0, 100.0, 100.0)
    assert perfect.depth == 4.0
    assert (wrong.ida_pct, wrong.completion_pct, wrong.gt_rda_pct) == (0.0, 0.0, 0.0)
    assert wrong.depth == 0.0
    assert elapsed < 10.0
    _report(2, f"{len(case_pool)} mixed cases over {len(diagnoses)} diagnoses: perfect "
               f"mock 100/100/4.000/100, always-wrong 0/0/0.000/0 ({elapsed:.2f}s)")


def test_criterion_03_pipeline_oracle(catalog, diagrams):
    """>= 200 seeded records: every programmed finding and targeted path agrees."""
    start = time.monotonic()
    n_records = 0
    n_findings = 0
    for preset in PRESETS:
        for seed in range(9):
            spec = preset.spec(seed)
            result = synthesize(spec)
            dmap = ideal_probability_map(result.record, result.segments)
            dset = delineate_from_map(result.record, dmap)
            analysis = analyze_record(result.record, dset, catalog, diagrams)
            present = {f.finding_id for f in analysis.findings if f.present}
            for fid in preset.expected_findings:
                assert fid in present, f"{preset.name}/{seed}: {fid} missing"
                n_findings += 1
            for fid in preset.absent_findings:
                assert fid not in present, f"{preset.name}/{seed}: {fid} unexpectedly present"
            if preset.diagnosis_id is not None:
                res = analysis.results[preset.diagnosis_id]
                assert res.decision == preset.expected_decision, f"{preset.name}/{seed}"
                outcomes = "".join("Y" if o == "yes" else "N" for _, o in res.path.steps)
                assert outcomes == preset.expected_outcomes, (
                    f"{preset.name}/{seed}: path {outcomes} != {preset.expected_outcomes}"
                )
            else:
                positives = [dx for dx, r in analysis.results.items() if r.positive]
                assert positives == [], f"{preset.name}/{seed}: {positives}"
            n_records += 1
    elapsed = time.monotonic() - start
    assert n_records >= 200
    assert elapsed < 30.0
    _report(3, f"{n_records} records, {n_findings} programmed findings and all targeted "
               f"paths reproduced with 100% agreement ({elapsed:.1f}s)")


def test_criterion_04_postprocessing_thresholds():
    """P-recovery 60 ms / 5% boundaries and 4-lead min/max consensus, exact."""
    outcomes = {}
    for dur in (59, 60, 61):
        record, per_lead, _ = rect_candidate_record(dur, amp=0.2)
        out = dl.recover_p_waves(record, per_lead)
        outcomes[f"{dur}ms"] = any(
            s.wave_class is WaveClass.P and 1000 <= s.onset <= 2500 for s in out["II"]
        )
    assert outcomes == {"59ms": False, "60ms": True, "61ms": True}
    for frac, want in ((0.049, False), (0.051, True)):
        record, per_lead, _ = rect_candidate_record(80, amp=frac)
        out = dl.recover_p_waves(record, per_lead)
        got = any(s.wave_class is WaveClass.P and 1000 <= s.onset <= 2500 for s in out["II"])
        assert got == want, f"{frac:.3f}"

    seg = lambda lead, on, off: WaveSegment(WaveClass.P, lead, on, off, (on + off) // 2)
    three = {lead: [seg(lead, 100, 140)] for lead in ("I", "II", "V1")}
    assert dl.build_consensus(three, 100).consensus == []
    onsets, offsets = (100, 102, 98, 101), (140, 145, 139, 141)
    four = {lead: [seg(lead, on, off)]
            for lead, on, off in zip(("I", "II", "III", "aVF"), onsets, offsets)}
    cons = dl.build_consensus(four, 100).consensus
    assert len(cons) == 1 and (cons[0].onset, cons[0].offset) == (98, 145)
    _report(4, "P recovery accepts {60,61} ms and 5.1%, rejects 59 ms and 4.9%; "
               "consensus needs 4 leads and spans [min onset, max offset] = [98, 145]")


def test_criterion_05_segmentation_perturbation():
    """Boundary shifts {0, 140, 151} ms score {1.0, 1.0, 0.0-with-FN/FP}; swap is exact."""
    spec = SyntheticSpec(sampling_rate=1000, record_id="acc5")
    result = synthesize(spec)
    truth = dl.delineation_from_segments(result.segments, 1000, record_id="acc5")

    def shifted(delta_samples):
        segs = [
            WaveSegment(s.wave_class, s.lead, s.onset + delta_samples,
                        s.offset + delta_samples, s.peak + delta_samples)
            for s in result.segments
        ]
        return dl.delineation_from_segments(segs, 1000, record_id="acc5")

    for delta in (0, 140):
        score = dl.score_segmentation(shifted(delta), truth, tolerance_ms=150.0)
        overall = score.overall()
        assert overall.recall == 1.0 and overall.precision == 1.0, delta
        assert overall.fn == 0 and overall.fp == 0

    score151 = dl.score_segmentation(shifted(151), truth, tolerance_ms=150.0)
    overall = score151.overall()
    assert overall.tp == 0
    assert overall.recall == 0.0 and overall.precision == 0.0
    assert overall.fn == overall.fp > 0

    fwd = dl.score_segmentation(shifted(151), truth)
    rev = dl.score_segmentation(truth, shifted(151))
    for cls in WaveClass:
        for kind in ("onset", "offset"):
            a, b = fwd.score(cls, kind), rev.score(cls, kind)
            assert (a.tp, a.fn, a.fp) == (b.tp, b.fp, b.fn)
            assert a.recall == b.precision and a.precision == b.recall
    _report(5, "shifts {0, 140} ms score 1.0/1.0; 151 ms scores 0.0 with FN=FP; "
               "swapping predicted/reference exchanges recall and precision exactly")


def test_criterion_06_sampler_arithmetic(diagrams):
    """Per-path quotas reproduce the overflow pattern: 102, 105, 100."""

    def pool_for(diagram, polarity, per_path):
        sign = POSITIVE if polarity == "+" else NEGATIVE
        paths = paths_by_sign(diagram)[0 if polarity == "+" else 1]
        out = []
        for path in paths:
            for i in range(per_path):
                out.append(bg.CaseCandidate(
                    record_id=f"{diagram.diagnosis_id}{path.path_id}#{i:04d}",
                    result=DiagnosisResult(diagnosis_id=diagram.diagnosis_id,
                                           decision=sign, path=path, evidence=()),
                ))
        return out

    # 3 paths (3AVB negative side): 34 each, 102 total.
    d3 = diagrams["3AVB"]
    outcome = bg.stratified_sample(pool_for(d3, "-", 60), bg.SamplingPlan(100),
                                   {"3AVB": d3}, seed=5)
    neg_rows = [r for r in outcome.rows if r.polarity == "-"]
    assert [r.quota for r in neg_rows] == [34, 34, 34]
    assert sum(r.drawn for r in neg_rows) == 102

    # 7 paths: synthetic diagram with 7 positive alternatives.
    nodes = {}
    for i in range(1, 8):
        nodes[f"n{i}"] = {"finding_id": "prolonged_pr", "yes": "POSITIVE",
                          "no": (f"n{i + 1}" if i < 7 else "NEGATIVE")}
    d7 = parse_diagrams({"diagrams": [{
        "diagnosis_id": "SEVEN", "display_name": "seven", "group": "g",
        "root": "n1", "nodes": nodes,
    }]})["SEVEN"]
    assert len(paths_by_sign(d7)[0]) == 7
    outcome7 = bg.stratified_sample(pool_for(d7, "+", 40), bg.SamplingPlan(100),
                                    {"SEVEN": d7}, seed=5)
    pos_rows = [r for r in outcome7.rows if r.polarity == "+"]
    assert [r.quota for r in pos_rows] == [15] * 7
    assert sum(r.drawn for r in pos_rows) == 105

    # 1 path (1AVB positive side): exactly 100.
    d1 = diagrams["1AVB"]
    outcome1 = bg.stratified_sample(pool_for(d1, "+", 150), bg.SamplingPlan(100),
                                    {"1AVB": d1}, seed=5)
    pos1 = [r for r in outcome1.rows if r.polarity == "+"]
    assert [r.drawn for r in pos1] == [100]
    _report(6, "3 paths -> 34|34|34 = 102; 7 paths -> 15 each = 105; 1 path -> 100")


def test_criterion_07_case_closure(case_pool, diagrams):
    """Replaying GT answers through the diagrams reproduces every polarity."""
    violations = [c.case_id for c in case_pool
                  if not bg.replay_case(c, diagrams[c.diagnosis_id])]
    assert violations == []
    _report(7, f"0 closure violations over {len(case_pool)} generated cases")


def test_criterion_08_determinism(tmp_path):
    """generate and mock evaluate are byte-identical across same-seed runs."""
    synth_dir = tmp_path / "records"
    analyzed = tmp_path / "analyzed"
    assert cli.main(["synth", "--out", str(synth_dir),
                     "--presets", "normal,avb1,clbbb,iscan,pvc",
                     "--seeds-per-preset", "1"]) == 0
    assert cli.main(["analyze", "--records", str(synth_dir), "--annotations",
                     str(synth_dir), "--out", str(analyzed), "--jobs", "2"]) == 0
    payloads = {}
    for run in ("g1", "g2"):
        gen = tmp_path / run
        assert cli.main(["generate", "--analyzed", str(analyzed), "--seed", "99",
                         "--target", "2", "--out", str(gen)]) == 0
        ev = tmp_path / (run + "-eval")
        assert cli.main(["evaluate", "--cases", str(gen / "cases.jsonl"),
                         "--mock", "random:5", "--out", str(ev)]) == 0
        payloads[run] = (
            (gen / "cases.jsonl").read_bytes(),
            (ev / "metrics.json").read_bytes(),
        )
    assert payloads["g1"][0] == payloads["g2"][0], "cases.jsonl differs"
    assert payloads["g1"][1] == payloads["g2"][1], "metrics differ"
    _report(8, "same-seed generate and mock evaluate produce byte-identical "
               "cases.jsonl and metrics")


def test_criterion_09_frontal_axis(catalog, diagrams):
    """The 0, 90, and 45 degree constructions hold within 0.5 degrees."""
    measured = {}
    for axis in (0.0, 90.0, 45.0):
        _, analysis = analyze_spec(SyntheticSpec(axis_deg=axis), catalog, diagrams)
        got = analysis.measurements.median_axis_deg
        assert got == pytest.approx(axis, abs=0.5), axis
        measured[axis] = got
    assert ft.frontal_axis(1.0, 0.0) == pytest.approx(0.0, abs=1e-9)
    assert ft.frontal_axis(0.0, 1.0) == pytest.approx(90.0, abs=1e-9)
    assert ft.frontal_axis(1.0, 1.0) == pytest.approx(45.0, abs=1e-9)
    _report(9, "synthesized axes measured at "
               + ", ".join(f"{k:g}->{v:.3f}" for k, v in measured.items())
               + " (all within 0.5 deg)")


def test_criterion_10_random_guess_baseline(case_pool):
    """Uniform-random mock: IDA 50+-5, four-option accuracy 25+-5, >= 2000 turns."""
    initial_total = initial_correct = 0
    mc_total = mc_correct = 0
    for seed in range(15):
        model = hz.RandomModel(seed=seed)
        for case in case_pool:
            transcript = hz.run_session(case, model)
            initial_total += 1
            initial_correct += transcript.initial_correct
            options_by_prompt = {
                (t.finding_loop_index, t.step): t.options for t in case.turns
            }
            for rec in transcript.turns:
                if not rec.asked:
                    continue
                options = options_by_prompt.get((rec.loop, rec.step))
                if options is not None and len(options) == 4:
                    mc_total += 1
                    mc_correct += rec.correct
    assert mc_total >= 2000, mc_total
    ida = 100.0 * initial_correct / initial_total
    acc = 100.0 * mc_correct / mc_total
    assert 45.0 <= ida <= 55.0, ida
    assert 20.0 <= acc <= 30.0, acc
    _report(10, f"random mock over {mc_total} four-option turns: accuracy {acc:.1f}% "
                f"(25+-5), IDA {ida:.1f}% (50+-5)")
