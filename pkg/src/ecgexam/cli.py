"""Command-line entry point: one subcommand per pipeline stage.

Stages compose through files (records, annotations, analyses, cases,
transcripts), so each stage is independently testable and reproducible.
All outputs land under --out together with a manifest.json; timestamps go
only to the sidecar run.log.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import benchgen, delineation, harness, pipeline, presets, records, render
from .diagnosis import DiagnosisResult, load_compounds, load_diagrams
from .errors import EcgExamError
from .findings import Finding, load_catalog
from .synth import SyntheticSpec, synthesize


def _log(out_dir: Path, message: str) -> None:
    with (out_dir / "run.log").open("a", encoding="utf-8") as fh:
        fh.write(f"[{time.strftime('%Y-%m-%d %H:%M:%S')}] {message}\n")
    print(message, file=sys.stderr)


def _write_manifest(out_dir: Path, payload: dict) -> None:
    (out_dir / "manifest.json").write_text(
        json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )


def _stable_json(data) -> str:
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


def _record_format(path: Path) -> str:
    return "packed-binary" if path.suffix == ".ecgb" else "csv"


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = None if args.presets == "all" else args.presets.split(",")
    if args.spec_file:
        spec_entries = json.loads(Path(args.spec_file).read_text(encoding="utf-8"))
        jobs = [(None, SyntheticSpec(**entry)) for entry in spec_entries]
    else:
        jobs = presets.build_pool(seeds_per_preset=args.seeds_per_preset, names=names)
        jobs = [(p, s) for p, s in jobs]

    fmt_ext = ".ecgb" if args.format == "packed-binary" else ".csv"
    entries, errors = [], []
    for preset, spec in jobs:
        try:
            result = synthesize(spec)
            rec_path = out_dir / f"{result.record.id}{fmt_ext}"
            records.write_record(result.record, rec_path, format=args.format)
            ann_path = out_dir / f"{result.record.id}.segments.json"
            records.write_annotations(result.segments, ann_path)
            entry = {
                "record_id": result.record.id,
                "record": rec_path.name,
                "annotations": ann_path.name,
                "expected": result.expected,
            }
            if preset is not None:
                entry["preset"] = preset.name
                entry["targeted_diagnosis"] = preset.diagnosis_id
                entry["expected_decision"] = preset.expected_decision
                entry["expected_outcomes"] = preset.expected_outcomes
                entry["expected_findings"] = list(preset.expected_findings)
            for fmt in (args.render.split(",") if args.render else []):
                img = render.render_ecg_image(result.record, layout=args.layout, fmt=fmt)
                img_path = out_dir / f"{result.record.id}.{fmt}"
                img_path.write_bytes(img)
                entry[fmt] = img_path.name
            entries.append(entry)
        except EcgExamError as exc:
            errors.append({"record": getattr(spec, "record_id", "?"), "error": str(exc)})
            _log(out_dir, f"synth error: {exc}")
    _write_manifest(out_dir, {"command": "synth", "records": entries, "errors": errors})
    _log(out_dir, f"synth: wrote {len(entries)} records to {out_dir}")
    return 0 if entries else 1


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _analyze_one(rec_path: Path, args, catalog, diagrams, compounds, out_dir: Path) -> dict:
    record = records.read_record(rec_path, format=_record_format(rec_path))
    if args.maps:
        map_path = Path(args.maps) / f"{record.id}.ecgmap"
        _, dmap = records.read_probability_map(map_path)
        dset = pipeline.delineate_from_map(record, dmap)
    else:
        ann_path = Path(args.annotations) / f"{record.id}.segments.json"
        segments = records.read_annotations(ann_path)
        dset = pipeline.delineate_from_annotations(record, segments)
    analysis = pipeline.analyze_record(record, dset, catalog, diagrams, compounds)
    out_path = out_dir / f"{record.id}.analysis.json"
    payload = analysis.to_dict()
    record_paths = {"signal": str(rec_path)}
    for fmt in ("png", "svg"):
        sidecar = rec_path.with_suffix(f".{fmt}")
        if sidecar.exists():
            record_paths[fmt] = str(sidecar)
    payload["record_paths"] = record_paths
    out_path.write_text(_stable_json(payload), encoding="utf-8")
    return {"record_id": record.id, "analysis": out_path.name}


def cmd_analyze(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not args.maps and not args.annotations:
        print("analyze: need --annotations or --maps", file=sys.stderr)
        return 2
    catalog = load_catalog(args.catalog)
    diagrams = load_diagrams(args.diagrams, catalog=catalog)
    compounds = load_compounds()
    root = Path(args.records)
    rec_paths = sorted(root.glob("*.csv")) + sorted(root.glob("*.ecgb")) if root.is_dir() else [root]

    entries, errors = [], []

    def run(path: Path):
        try:
            return _analyze_one(path, args, catalog, diagrams, compounds, out_dir), None
        except (EcgExamError, OSError) as exc:
            return None, {"record": path.name, "error": str(exc)}

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run, rec_paths))
    else:
        results = [run(p) for p in rec_paths]
    for entry, error in results:
        if entry:
            entries.append(entry)
        else:
            errors.append(error)
            _log(out_dir, f"analyze error: {error['record']}: {error['error']}")
    _write_manifest(out_dir, {"command": "analyze", "analyses": entries, "errors": errors})
    _log(out_dir, f"analyze: {len(entries)} ok, {len(errors)} failed")
    return 0 if not (errors and not entries) else 1


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    catalog = load_catalog(args.catalog)
    diagrams = load_diagrams(args.diagrams, catalog=catalog)
    templates = benchgen.load_templates(args.templates)

    label_filter = None
    if args.labels:
        raw = json.loads(Path(args.labels).read_text(encoding="utf-8"))
        label_filter = {rid: set(v) for rid, v in raw.items()}

    analyses = {}
    candidates: list[benchgen.CaseCandidate] = []
    for path in sorted(Path(args.analyzed).glob("*.analysis.json")):
        data = json.loads(path.read_text(encoding="utf-8"))
        analyses[data["record_id"]] = data
        for dx, rd in data["diagnoses"].items():
            candidates.append(
                benchgen.CaseCandidate(
                    record_id=data["record_id"],
                    result=DiagnosisResult.from_dict(rd),
                    payload=path.name,
                )
            )

    plan = benchgen.SamplingPlan(target_count=args.target)
    outcome = benchgen.stratified_sample(candidates, plan, diagrams, seed=args.seed,
                                         label_filter=label_filter)

    cases, errors = [], []
    for cand in outcome.selected:
        data = analyses[cand.record_id]
        support = data["case_support"]
        context = benchgen.RecordContext(
            record_id=cand.record_id,
            duration_s=support["duration_s"],
            sampling_rate=support["sampling_rate"],
            qrs_onsets_s=support["qrs_onsets_s"],
            paths=data.get("record_paths", {}),
        )
        findings = [Finding.from_dict(f) for f in data["findings"]]
        try:
            case = benchgen.build_case(
                context, findings, cand.result, catalog, seed=args.seed,
                display_name=diagrams[cand.diagnosis_id].display_name,
                templates=templates,
            )
            cases.append(case)
        except EcgExamError as exc:
            errors.append({"record": cand.record_id, "diagnosis": cand.diagnosis_id,
                           "error": str(exc)})
            _log(out_dir, f"generate: rejected {cand.record_id}/{cand.diagnosis_id}: {exc}")

    cases_path = out_dir / "cases.jsonl"
    benchgen.write_cases_jsonl(cases, cases_path)
    stats = benchgen.dataset_stats(cases)
    (out_dir / "stats.json").write_text(_stable_json(stats), encoding="utf-8")
    (out_dir / "sampling.txt").write_text(outcome.per_path_table() + "\n", encoding="utf-8")
    _write_manifest(out_dir, {
        "command": "generate", "seed": args.seed, "n_cases": len(cases),
        "cases": cases_path.name, "errors": errors,
    })
    _log(out_dir, f"generate: {len(cases)} cases -> {cases_path}")
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _build_model(args):
    if args.mock:
        kind, _, seed = args.mock.partition(":")
        if kind == "perfect":
            return harness.PerfectModel()
        if kind == "wrong":
            return harness.AlwaysWrongModel()
        if kind == "random":
            return harness.RandomModel(seed=int(seed or args.seed))
        raise ValueError(f"unknown mock {args.mock!r}")
    if not args.base_url or not args.model:
        raise ValueError("evaluate: need --mock or both --base-url and --model")
    endpoint = harness.ModelEndpoint(
        base_url=args.base_url,
        model=args.model,
        path=args.endpoint_path,
        auth_value=os.environ.get(args.api_key_env, ""),
        timeout_s=args.timeout,
        max_retries=args.max_retries,
    )
    limiter = harness.RateLimiter(args.max_rps)
    return harness.HttpChatModel(endpoint, rate_limiter=limiter)


def cmd_evaluate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cases = benchgen.read_cases_jsonl(args.cases)
    model = _build_model(args)
    verifier = harness.Verifier()
    if args.judge_url:
        judge = harness.ModelEndpoint(
            base_url=args.judge_url, model=args.judge_model or "judge",
            path=args.judge_path,
            auth_value=os.environ.get(args.api_key_env, ""),
        )
        verifier = harness.Verifier(kind="external-judge", judge=judge)
    system_prompt = None
    if args.system_prompt:
        system_prompt = Path(args.system_prompt).read_text(encoding="utf-8")

    transcripts = harness.evaluate_cases(
        cases, model, verifier=verifier, system_prompt=system_prompt,
        jobs=args.jobs, transcript_path=out_dir / "transcripts.jsonl",
        resume=not args.no_resume, with_images=args.with_images,
    )
    report = harness.compute_metrics(transcripts)
    (out_dir / "metrics.json").write_text(_stable_json(report.to_dict()), encoding="utf-8")
    (out_dir / "report.txt").write_text(report.to_table() + "\n", encoding="utf-8")
    _write_manifest(out_dir, {
        "command": "evaluate", "n_sessions": report.n_sessions,
        "n_failed": report.n_failed, "metrics": "metrics.json",
    })
    print(report.to_table())
    return 0


# ---------------------------------------------------------------------------
# score-seg and render
# ---------------------------------------------------------------------------

def _per_lead_set(segs, rate) -> delineation.DelineationSet:
    per_lead: dict[str, list] = {}
    for seg in segs:
        per_lead.setdefault(seg.lead, []).append(seg)
    return delineation.DelineationSet(
        sampling_rate=rate, per_lead=per_lead, consensus=[],
        provenance=delineation.PROVENANCE_ANNOTATION,
    )


def cmd_score_seg(args) -> int:
    predicted = records.read_annotations(args.predicted)
    reference = records.read_annotations(args.reference)
    score = delineation.score_segmentation(
        _per_lead_set(predicted, args.rate),
        _per_lead_set(reference, args.rate),
        tolerance_ms=args.tolerance_ms,
    )
    print(score.to_table())
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "segmentation_score.json").write_text(
            _stable_json(score.to_dict()), encoding="utf-8"
        )
    return 0


def cmd_render(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rec_path = Path(args.record)
    record = records.read_record(rec_path, format=_record_format(rec_path))
    written = []
    for fmt in args.formats.split(","):
        payload = render.render_ecg_image(record, layout=args.layout, fmt=fmt)
        path = out_dir / f"{record.id}.{fmt}"
        path.write_bytes(payload)
        written.append(path.name)
    _write_manifest(out_dir, {"command": "render", "outputs": written, "errors": []})
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecgexam",
        description="Rule-based 12-lead ECG analysis and multi-turn reading exams for chat models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic records with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--presets", default="all", help="comma list of preset names, or 'all'")
    p.add_argument("--seeds-per-preset", type=int, default=2)
    p.add_argument("--spec-file", help="JSON list of synthesis spec objects (overrides presets)")
    p.add_argument("--format", choices=["csv", "packed-binary"], default="csv")
    p.add_argument("--render", default="", help="comma list of image formats (svg,png)")
    p.add_argument("--layout", choices=list(render.LAYOUTS), default="grid-3x4-plus-rhythm")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="delineate, measure, and diagnose records")
    p.add_argument("--records", required=True, help="record file or directory")
    p.add_argument("--annotations", help="directory of <id>.segments.json files")
    p.add_argument("--maps", help="directory of <id>.ecgmap probability maps")
    p.add_argument("--catalog")
    p.add_argument("--diagrams")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("generate", help="build benchmark cases from analyses")
    p.add_argument("--analyzed", required=True, help="directory of .analysis.json files")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--target", type=int, default=100, help="target cases per (diagnosis, sign)")
    p.add_argument("--labels", help="JSON map record_id -> [positive diagnosis ids]")
    p.add_argument("--catalog")
    p.add_argument("--diagrams")
    p.add_argument("--templates")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="run sessions against a model or mock")
    p.add_argument("--cases", required=True)
    p.add_argument("--mock", help="perfect | wrong | random[:seed]")
    p.add_argument("--base-url")
    p.add_argument("--model")
    p.add_argument("--endpoint-path", default="/v1/chat/completions")
    p.add_argument("--api-key-env", default="ECGEXAM_API_KEY")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--max-rps", type=float, default=None)
    p.add_argument("--judge-url")
    p.add_argument("--judge-path", default="/judge")
    p.add_argument("--judge-model")
    p.add_argument("--system-prompt", help="path to a system prompt override")
    p.add_argument("--with-images", action="store_true",
                   help="attach the case's PNG rendering to the first message")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-resume", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score-seg", help="score a delineation against a reference")
    p.add_argument("--predicted", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--rate", type=int, required=True, help="sampling rate of both annotation sets")
    p.add_argument("--tolerance-ms", type=float, default=150.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_score_seg)

    p = sub.add_parser("render", help="render a record to SVG/PNG")
    p.add_argument("--record", required=True)
    p.add_argument("--layout", choices=list(render.LAYOUTS), default="grid-3x4-plus-rhythm")
    p.add_argument("--formats", default="svg,png")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EcgExamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
