"""End-to-end CLI flows: synth -> analyze -> generate -> evaluate."""

import json
import subprocess
import sys

import numpy as np
import pytest

from ecgexam import cli
from ecgexam.leads import LEADS
from ecgexam.records import EcgRecord, write_record


@pytest.fixture(scope="module")
def stage_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    synth = root / "records"
    analyzed = root / "analyzed"
    gen = root / "gen"
    assert cli.main([
        "synth", "--out", str(synth),
        "--presets", "normal,avb1,clbbb,pvc,iscan",
        "--seeds-per-preset", "1", "--render", "svg",
    ]) == 0
    assert cli.main([
        "analyze", "--records", str(synth), "--annotations", str(synth),
        "--out", str(analyzed), "--jobs", "2",
    ]) == 0
    assert cli.main([
        "generate", "--analyzed", str(analyzed), "--seed", "7", "--target", "2",
        "--out", str(gen),
    ]) == 0
    return root, synth, analyzed, gen


class TestSynth:
    def test_outputs_and_manifest(self, stage_dirs):
        _, synth, _, _ = stage_dirs
        manifest = json.loads((synth / "manifest.json").read_text())
        assert len(manifest["records"]) == 5
        for entry in manifest["records"]:
            assert (synth / entry["record"]).exists()
            assert (synth / entry["annotations"]).exists()
            assert (synth / entry["svg"]).exists()

    def test_ground_truth_read_back(self, stage_dirs):
        _, synth, _, _ = stage_dirs
        manifest = json.loads((synth / "manifest.json").read_text())
        entry = next(e for e in manifest["records"] if e["preset"] == "avb1")
        assert entry["expected"]["pr_ms"] == 240.0


class TestAnalyze:
    def test_per_record_outputs(self, stage_dirs):
        _, _, analyzed, _ = stage_dirs
        files = list(analyzed.glob("*.analysis.json"))
        assert len(files) == 5
        data = json.loads(next(f for f in files if "avb1" in f.name).read_text())
        assert data["diagnoses"]["1AVB"]["decision"] == "POSITIVE"
        present = {f["finding_id"] for f in data["findings"] if f["present"]}
        assert "prolonged_pr" in present

    def test_analyze_from_probability_maps(self, stage_dirs, tmp_path):
        from ecgexam.records import read_annotations, read_record, write_probability_map
        from ecgexam.synth import ideal_probability_map

        _, synth, _, _ = stage_dirs
        maps = tmp_path / "maps"
        maps.mkdir()
        rec_path = next(p for p in synth.glob("*.csv") if "avb1" in p.name)
        record = read_record(rec_path)
        segments = read_annotations(synth / f"{record.id}.segments.json")
        write_probability_map(ideal_probability_map(record, segments), record.id,
                              maps / f"{record.id}.ecgmap")
        out = tmp_path / "map-analyzed"
        rec_only = tmp_path / "rec"
        rec_only.mkdir()
        (rec_only / rec_path.name).write_bytes(rec_path.read_bytes())
        assert cli.main([
            "analyze", "--records", str(rec_only), "--maps", str(maps),
            "--out", str(out), "--jobs", "1",
        ]) == 0
        data = json.loads(next(out.glob("*.analysis.json")).read_text())
        assert data["diagnoses"]["1AVB"]["decision"] == "POSITIVE"
        assert data["delineation"]["provenance"] == "probability-map"

    def test_flat_record_error_does_not_abort_batch(self, tmp_path):
        rec_dir = tmp_path / "recs"
        rec_dir.mkdir()
        flat = EcgRecord(id="flatzero", sampling_rate=100, leads=LEADS,
                         samples=np.zeros((12, 1000), dtype=np.float32))
        write_record(flat, rec_dir / "flatzero.csv")
        (rec_dir / "flatzero.segments.json").write_text("[]")
        out = tmp_path / "analyzed"
        code = cli.main([
            "analyze", "--records", str(rec_dir), "--annotations", str(rec_dir),
            "--out", str(out), "--jobs", "1",
        ])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["errors"]
        assert code == 1  # nothing analyzable in this batch


class TestGenerate:
    def test_cases_and_stats(self, stage_dirs):
        _, _, _, gen = stage_dirs
        cases = (gen / "cases.jsonl").read_text().splitlines()
        assert cases
        stats = json.loads((gen / "stats.json").read_text())
        assert stats["n_cases"] == len(cases)
        assert (gen / "sampling.txt").exists()

    def test_deterministic_bytes(self, stage_dirs, tmp_path):
        _, _, analyzed, gen = stage_dirs
        again = tmp_path / "gen2"
        assert cli.main([
            "generate", "--analyzed", str(analyzed), "--seed", "7", "--target", "2",
            "--out", str(again),
        ]) == 0
        assert (gen / "cases.jsonl").read_bytes() == (again / "cases.jsonl").read_bytes()

    def test_different_seed_changes_bytes(self, stage_dirs, tmp_path):
        _, _, analyzed, gen = stage_dirs
        other = tmp_path / "gen3"
        assert cli.main([
            "generate", "--analyzed", str(analyzed), "--seed", "8", "--target", "2",
            "--out", str(other),
        ]) == 0
        assert (gen / "cases.jsonl").read_bytes() != (other / "cases.jsonl").read_bytes()


class TestEvaluate:
    def test_perfect_mock_all_100(self, stage_dirs, tmp_path):
        _, _, _, gen = stage_dirs
        out = tmp_path / "eval"
        assert cli.main([
            "evaluate", "--cases", str(gen / "cases.jsonl"), "--mock", "perfect",
            "--out", str(out),
        ]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["ida_pct"] == 100.0
        assert metrics["completion_pct"] == 100.0
        assert metrics["depth"] == 4.0
        assert metrics["gt_rda_pct"] == 100.0
        assert (out / "transcripts.jsonl").exists()
        assert (out / "report.txt").exists()

    def test_mock_evaluate_deterministic(self, stage_dirs, tmp_path):
        _, _, _, gen = stage_dirs
        outs = []
        for name in ("e1", "e2"):
            out = tmp_path / name
            assert cli.main([
                "evaluate", "--cases", str(gen / "cases.jsonl"),
                "--mock", "random:13", "--out", str(out),
            ]) == 0
            outs.append((out / "metrics.json").read_bytes())
        assert outs[0] == outs[1]


class TestScoreSegAndRender:
    def test_score_seg_identity(self, stage_dirs, capsys, tmp_path):
        _, synth, _, _ = stage_dirs
        ann = next(synth.glob("*.segments.json"))
        assert cli.main([
            "score-seg", "--predicted", str(ann), "--reference", str(ann),
            "--rate", "100", "--out", str(tmp_path / "seg"),
        ]) == 0
        table = capsys.readouterr().out
        assert "1.000" in table
        score = json.loads((tmp_path / "seg" / "segmentation_score.json").read_text())
        assert score["boundaries"]["QRS.onset"]["recall"] == 1.0

    def test_render_subcommand(self, stage_dirs, tmp_path):
        _, synth, _, _ = stage_dirs
        rec = next(synth.glob("*.csv"))
        out = tmp_path / "img"
        assert cli.main([
            "render", "--record", str(rec), "--formats", "svg,png", "--out", str(out),
        ]) == 0
        assert list(out.glob("*.svg")) and list(out.glob("*.png"))


class TestSpecFileAndLabels:
    def test_synth_from_spec_file(self, tmp_path):
        spec_file = tmp_path / "specs.json"
        spec_file.write_text(json.dumps([
            {"record_id": "custom-a", "pr_ms": 240.0, "seed": 1},
            {"record_id": "custom-b", "qrs_ms": 140.0, "qt_ms": 480.0, "seed": 2},
        ]))
        out = tmp_path / "records"
        assert cli.main(["synth", "--out", str(out), "--spec-file", str(spec_file)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        ids = {e["record_id"] for e in manifest["records"]}
        assert ids == {"custom-a", "custom-b"}

    def test_generate_with_label_filter(self, stage_dirs, tmp_path):
        _, _, analyzed, _ = stage_dirs
        manifest_ids = [p.name.replace(".analysis.json", "")
                        for p in analyzed.glob("*.analysis.json")]
        # Human labels disagree with every positive: all positives filtered out.
        labels = {rid: [] for rid in manifest_ids}
        labels_path = tmp_path / "labels.json"
        labels_path.write_text(json.dumps(labels))
        out = tmp_path / "gen-labels"
        assert cli.main([
            "generate", "--analyzed", str(analyzed), "--seed", "7", "--target", "2",
            "--labels", str(labels_path), "--out", str(out),
        ]) == 0
        stats = json.loads((out / "stats.json").read_text())
        assert stats["n_positive"] == 0
        assert stats["n_negative"] > 0


def test_console_script_help():
    proc = subprocess.run(
        [sys.executable, "-m", "ecgexam.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "synth" in proc.stdout and "evaluate" in proc.stdout
