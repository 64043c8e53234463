"""Multi-turn exam construction and path-stratified sampling.

A case is one initial diagnostic question plus one four-step verification
loop per traversed finding: criterion selection (multiple choice with
category- and presence-based distractors), finding identification
(yes/no), the grounding sub-tasks declared by the finding (lead, wave,
measurement), and a diagnostic decision.  Everything is seeded, so a case
is a pure function of (record analysis, diagnosis result, seed).
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .diagnosis import POSITIVE, DiagnosisResult, LogicDiagram, paths_by_sign, replay_path
from .errors import GroundingUnavailable
from .findings import CriterionSpec, Finding
from .leads import LEADS, canonical_sort

SCHEMA_VERSION = 1

STEP_INITIAL = "INITIAL"
STEP_CRITERION = "CRITERION_SELECTION"
STEP_IDENTIFY = "FINDING_IDENTIFICATION"
STEP_GROUND_LEAD = "GROUND_LEAD"
STEP_GROUND_WAVE = "GROUND_WAVE"
STEP_GROUND_MEASUREMENT = "GROUND_MEASUREMENT"
STEP_DECISION = "DIAGNOSTIC_DECISION"

# Option-range width per measurement unit: one clinical tolerance unit.
BIN_WIDTHS = {"ms": 20.0, "mV": 0.1, "deg": 15.0, "bpm": 10.0}
BIN_DECIMALS = {"ms": 0, "mV": 2, "deg": 0, "bpm": 0}
N_OPTIONS = 4


def stable_rng(*parts) -> random.Random:
    """Deterministic RNG independent of PYTHONHASHSEED."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def load_templates(path: str | Path | None = None) -> dict:
    if path is None:
        path = Path(str(resources.files("ecgexam").joinpath("data/templates.json")))
    return json.loads(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Turn:
    step: str
    prompt_text: str
    gt_answer: str
    gt_rationale: str = ""
    finding_loop_index: int | None = None
    finding_id: str | None = None
    options: list[str] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.options is not None:
            if sum(1 for o in self.options if o == self.gt_answer) != 1:
                raise ValueError(f"exactly one option must equal gt_answer: {self}")

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "finding_loop_index": self.finding_loop_index,
            "finding_id": self.finding_id,
            "prompt_text": self.prompt_text,
            "options": self.options,
            "gt_answer": self.gt_answer,
            "gt_rationale": self.gt_rationale,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Turn":
        return cls(
            step=d["step"],
            prompt_text=d["prompt_text"],
            gt_answer=d["gt_answer"],
            gt_rationale=d.get("gt_rationale", ""),
            finding_loop_index=d.get("finding_loop_index"),
            finding_id=d.get("finding_id"),
            options=d.get("options"),
            meta=d.get("meta", {}),
        )


@dataclass(frozen=True)
class RecordContext:
    """The slice of an analyzed record the case builder needs."""

    record_id: str
    duration_s: float
    sampling_rate: int
    qrs_onsets_s: list[float]
    paths: dict = field(default_factory=dict)  # pointers to signal/rendering files


@dataclass(frozen=True)
class BenchmarkCase:
    case_id: str
    record_id: str
    diagnosis_id: str
    polarity: str  # "+" | "-"
    path_id: str
    path_steps: tuple[tuple[str, str], ...]
    turns: tuple[Turn, ...]
    record_paths: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def n_reasoning_turns(self) -> int:
        return len(self.turns) - 1

    @property
    def n_loops(self) -> int:
        return len(self.path_steps)

    def loop_turns(self, loop_index: int) -> list[Turn]:
        return [t for t in self.turns if t.finding_loop_index == loop_index]

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "case_id": self.case_id,
            "record_id": self.record_id,
            "diagnosis_id": self.diagnosis_id,
            "polarity": self.polarity,
            "path_id": self.path_id,
            "path_steps": [list(s) for s in self.path_steps],
            "n_reasoning_turns": self.n_reasoning_turns,
            "record_paths": self.record_paths,
            "turns": [t.to_dict() for t in self.turns],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkCase":
        return cls(
            case_id=d["case_id"],
            record_id=d["record_id"],
            diagnosis_id=d["diagnosis_id"],
            polarity=d["polarity"],
            path_id=d["path_id"],
            path_steps=tuple((a, b) for a, b in d["path_steps"]),
            turns=tuple(Turn.from_dict(t) for t in d["turns"]),
            record_paths=d.get("record_paths", {}),
            schema_version=d.get("schema_version", SCHEMA_VERSION),
        )


# ---------------------------------------------------------------------------
# Case construction
# ---------------------------------------------------------------------------

def build_case(
    context: RecordContext,
    findings: list[Finding],
    result: DiagnosisResult,
    catalog: list[CriterionSpec],
    seed: int,
    display_name: str | None = None,
    templates: dict | None = None,
) -> BenchmarkCase:
    """Assemble the full multi-turn case for one (record, diagnosis) pair."""
    templates = templates or load_templates()
    by_id = {c.finding_id: c for c in catalog}
    findings_map = {f.finding_id: f for f in findings}
    diagnosis = display_name or result.diagnosis_id
    rng = stable_rng(seed, context.record_id, result.diagnosis_id)
    polarity = "+" if result.decision == POSITIVE else "-"
    path = result.path.steps
    path_ids = {fid for fid, _ in path}

    turns: list[Turn] = [
        Turn(
            step=STEP_INITIAL,
            prompt_text=templates["initial"].format(diagnosis=diagnosis),
            gt_answer="yes" if polarity == "+" else "no",
            gt_rationale=f"The reference analysis concludes {diagnosis} is "
            f"{'present' if polarity == '+' else 'absent'}.",
        )
    ]

    for loop_index, (fid, outcome) in enumerate(path, start=1):
        criterion = by_id[fid]
        finding = findings_map.get(fid)
        if finding is None:
            raise GroundingUnavailable(f"{context.record_id}: no evaluation for {fid!r}")

        turns.append(
            _criterion_turn(
                loop_index, criterion, findings_map, catalog, path_ids, diagnosis, templates, rng
            )
        )
        turns.append(
            Turn(
                step=STEP_IDENTIFY,
                finding_loop_index=loop_index,
                finding_id=fid,
                prompt_text=criterion.question,
                gt_answer="yes" if outcome == "yes" else "no",
                gt_rationale=_identify_rationale(criterion, finding),
            )
        )
        if outcome == "yes":
            for kind in criterion.grounding.kinds:
                turns.append(
                    _grounding_turn(loop_index, kind, criterion, finding, context, templates, rng)
                )

        final_loop = loop_index == len(path)
        if final_loop:
            gt = templates["decision_options"][0] if polarity == "+" else templates["decision_options"][1]
            rationale = f"All findings required by the reasoning path have been checked; {diagnosis} is {'confirmed' if polarity == '+' else 'excluded'}."
        else:
            gt = templates["decision_options"][2]
            rationale = "The reasoning path requires additional findings before a decision."
        turns.append(
            Turn(
                step=STEP_DECISION,
                finding_loop_index=loop_index,
                finding_id=fid,
                prompt_text=templates["decision"].format(diagnosis=diagnosis),
                options=list(templates["decision_options"]),
                gt_answer=gt,
                gt_rationale=rationale,
                meta={"n_subtasks": criterion.grounding.n_subtasks if outcome == "yes" else 0},
            )
        )

    return BenchmarkCase(
        case_id=f"{context.record_id}__{result.diagnosis_id}",
        record_id=context.record_id,
        diagnosis_id=result.diagnosis_id,
        polarity=polarity,
        path_id=result.path.path_id,
        path_steps=path,
        turns=tuple(turns),
        record_paths=dict(context.paths),
    )


def _identify_rationale(criterion: CriterionSpec, finding: Finding) -> str:
    if finding.present:
        g = finding.grounding
        bits = []
        if g.value is not None:
            bits.append(f"measured {_fmt_value(g.value, g.unit)} {g.unit}")
        if g.leads:
            bits.append("seen in " + ", ".join(g.leads))
        detail = f" ({'; '.join(bits)})" if bits else ""
        return f"{criterion.display_name} is present{detail}."
    return f"{criterion.display_name} is not present on this recording."


def _criterion_turn(
    loop_index: int,
    criterion: CriterionSpec,
    findings_map: dict[str, Finding],
    catalog: list[CriterionSpec],
    path_ids: set[str],
    diagnosis: str,
    templates: dict,
    rng: random.Random,
) -> Turn:
    correct = criterion.display_name
    category_pool = [
        c.display_name
        for c in catalog
        if c.category == criterion.category
        and c.finding_id != criterion.finding_id
        and c.finding_id not in path_ids
    ]
    presence_pool = [
        findings_map[c.finding_id].display_name
        for c in catalog
        if c.finding_id in findings_map
        and findings_map[c.finding_id].present
        and c.finding_id not in path_ids
        and c.finding_id != criterion.finding_id
        and c.display_name not in category_pool
    ]
    n_cat = min(2, len(category_pool))
    chosen_cat = rng.sample(category_pool, n_cat)
    presence_pool = [p for p in presence_pool if p not in chosen_cat]
    chosen_presence = rng.sample(presence_pool, min(1, len(presence_pool)))

    distractors = chosen_cat + chosen_presence
    # Fallback when one pool is short: top up from the other.
    fallback = None
    while len(distractors) < N_OPTIONS - 1:
        extra_cat = [c for c in category_pool if c not in distractors]
        extra_presence = [p for p in presence_pool if p not in distractors]
        if extra_cat:
            distractors.append(rng.sample(extra_cat, 1)[0])
            fallback = fallback or "category-only"
        elif extra_presence:
            distractors.append(rng.sample(extra_presence, 1)[0])
            fallback = fallback or "presence-only"
        else:
            fallback = "insufficient-distractors"
            break

    options = [correct] + distractors
    rng.shuffle(options)
    template = templates["criterion_first"] if loop_index == 1 else templates["criterion_next"]
    meta = {
        "category_distractors": chosen_cat,
        "presence_distractors": chosen_presence,
    }
    if fallback:
        meta["fallback"] = fallback
    return Turn(
        step=STEP_CRITERION,
        finding_loop_index=loop_index,
        finding_id=criterion.finding_id,
        prompt_text=template.format(diagnosis=diagnosis),
        options=options,
        gt_answer=correct,
        gt_rationale=f"The reasoning path for {diagnosis} evaluates '{correct}' at this step.",
        meta=meta,
    )


def _grounding_turn(
    loop_index: int,
    kind: str,
    criterion: CriterionSpec,
    finding: Finding,
    context: RecordContext,
    templates: dict,
    rng: random.Random,
) -> Turn:
    g = finding.grounding
    if kind == "lead":
        if not g.leads:
            raise GroundingUnavailable(f"{finding.finding_id}: lead grounding empty")
        return _lead_turn(loop_index, criterion, g.leads, templates, rng)
    if kind == "wave":
        if not g.segments:
            raise GroundingUnavailable(f"{finding.finding_id}: wave grounding empty")
        return _wave_turn(loop_index, criterion, g.segments, context, templates, rng)
    if g.value is None:
        raise GroundingUnavailable(f"{finding.finding_id}: measurement grounding empty")
    return _measurement_turn(loop_index, criterion, g.value, g.unit, templates, rng)


def _lead_turn(loop_index, criterion, correct_leads, templates, rng) -> Turn:
    correct = canonical_sort(list(correct_leads))
    sets = {tuple(correct)}
    options_sets = [correct]
    guard = 0
    while len(options_sets) < N_OPTIONS and guard < 200:
        guard += 1
        perturbed = _perturb_lead_set(correct, rng)
        if tuple(perturbed) not in sets:
            sets.add(tuple(perturbed))
            options_sets.append(perturbed)
    options = [", ".join(s) for s in options_sets]
    gt = options[0]
    rng.shuffle(options)
    return Turn(
        step=STEP_GROUND_LEAD,
        finding_loop_index=loop_index,
        finding_id=criterion.finding_id,
        prompt_text=templates["ground_lead"].format(short_phrase=criterion.short_phrase),
        options=options,
        gt_answer=gt,
        gt_rationale=f"The finding is exhibited by leads {gt}.",
        meta={"lead_sets": [list(s) for s in options_sets]},
    )


def _perturb_lead_set(correct: list[str], rng: random.Random) -> list[str]:
    others = [lead for lead in LEADS if lead not in correct]
    ops = ["swap", "add"] + (["drop"] if len(correct) > 1 else [])
    op = rng.choice(ops)
    current = list(correct)
    if op == "swap" and others:
        current[rng.randrange(len(current))] = rng.choice(others)
    elif op == "add" and others:
        current.append(rng.choice(others))
    elif op == "drop":
        current.pop(rng.randrange(len(current)))
    if rng.random() < 0.3 and [lead for lead in LEADS if lead not in current]:
        current.append(rng.choice([lead for lead in LEADS if lead not in current]))
    return canonical_sort(list(dict.fromkeys(current)))


def _wave_turn(loop_index, criterion, segments, context, templates, rng) -> Turn:
    windows = _wave_windows(context)
    mid = (segments[0][0] + segments[0][1]) / 2.0
    correct_idx = next(
        (i for i, (a, b) in enumerate(windows) if a <= mid < b), len(windows) - 1
    )
    texts = [f"from {a:.2f} s to {b:.2f} s" for a, b in windows]
    gt = texts[correct_idx]
    order = list(range(len(texts)))
    rng.shuffle(order)
    options = [texts[i] for i in order]
    return Turn(
        step=STEP_GROUND_WAVE,
        finding_loop_index=loop_index,
        finding_id=criterion.finding_id,
        prompt_text=templates["ground_wave"].format(short_phrase=criterion.short_phrase),
        options=options,
        gt_answer=gt,
        gt_rationale=f"The evidence segment at {mid:.2f} s lies {gt}.",
        meta={
            "windows": [list(w) for w in windows],
            "target_midpoint_s": mid,
            "segments": [list(s) for s in segments],
        },
    )


def _wave_windows(context: RecordContext) -> list[tuple[float, float]]:
    """Split the strip into 4 windows, edges snapped to beat boundaries."""
    duration = context.duration_s
    onsets = [t for t in context.qrs_onsets_s if 0 < t < duration]
    edges: list[float] = []
    if len(onsets) >= 5:
        n = len(onsets)
        edges = [onsets[n // 4], onsets[n // 2], onsets[(3 * n) // 4]]
        edges = sorted(set(edges))
    if len(edges) != 3:
        edges = [duration * 0.25, duration * 0.5, duration * 0.75]
    bounds = [0.0] + edges + [duration]
    return [(bounds[i], bounds[i + 1]) for i in range(4)]


def _fmt_value(value: float, unit: str | None) -> str:
    decimals = BIN_DECIMALS.get(unit or "", 2)
    return f"{value:.{decimals}f}"


def _measurement_turn(loop_index, criterion, value, unit, templates, rng) -> Turn:
    width = BIN_WIDTHS.get(unit or "", 1.0)
    position = rng.randrange(N_OPTIONS)
    lo0 = value - width / 2.0 - position * width
    bins = [(lo0 + i * width, lo0 + (i + 1) * width) for i in range(N_OPTIONS)]
    decimals = BIN_DECIMALS.get(unit or "", 2)
    texts = [f"from {a:.{decimals}f} to {b:.{decimals}f} {unit}" for a, b in bins]
    gt = texts[position]
    order = list(range(N_OPTIONS))
    rng.shuffle(order)
    options = [texts[i] for i in order]
    quantity = templates["quantity_names"].get(criterion.grounding.field, criterion.grounding.field)
    return Turn(
        step=STEP_GROUND_MEASUREMENT,
        finding_loop_index=loop_index,
        finding_id=criterion.finding_id,
        prompt_text=templates["ground_measurement"].format(quantity=quantity),
        options=options,
        gt_answer=gt,
        gt_rationale=f"The measured {quantity} is {_fmt_value(value, unit)} {unit}, which falls {gt}.",
        meta={"bins": [list(b) for b in bins], "value": value, "unit": unit,
              "gt_bin_index": position},
    )


# ---------------------------------------------------------------------------
# Replay (closure property)
# ---------------------------------------------------------------------------

def replay_case(case: BenchmarkCase, diagram: LogicDiagram) -> bool:
    """Feed the case's GT identification answers back through the diagram."""
    outcomes = {
        t.finding_id: t.gt_answer == "yes"
        for t in case.turns
        if t.step == STEP_IDENTIFY
    }
    leaf = replay_path(diagram, outcomes)
    return ("+" if leaf == POSITIVE else "-") == case.polarity


# ---------------------------------------------------------------------------
# Stratified sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaseCandidate:
    record_id: str
    result: DiagnosisResult
    payload: object = None

    @property
    def diagnosis_id(self) -> str:
        return self.result.diagnosis_id

    @property
    def polarity(self) -> str:
        return "+" if self.result.decision == POSITIVE else "-"


@dataclass(frozen=True)
class SamplingPlan:
    target_count: int = 100
    overrides: dict = field(default_factory=dict)  # (dx, polarity) -> target

    def target_for(self, diagnosis_id: str, polarity: str) -> int:
        return self.overrides.get((diagnosis_id, polarity), self.target_count)


@dataclass(frozen=True)
class SamplingRow:
    diagnosis_id: str
    polarity: str
    path_id: str
    available: int
    quota: int
    drawn: int

    @property
    def shortfall(self) -> int:
        return max(0, self.quota - self.drawn)


@dataclass(frozen=True)
class SamplingOutcome:
    selected: list[CaseCandidate]
    rows: list[SamplingRow]

    def per_path_table(self) -> str:
        lines = [f"{'Dx':<8}{'+/-':<4}{'path':<18}{'avail':>7}{'quota':>7}{'drawn':>7}{'short':>7}"]
        for row in self.rows:
            lines.append(
                f"{row.diagnosis_id:<8}{row.polarity:<4}{row.path_id:<18}"
                f"{row.available:>7}{row.quota:>7}{row.drawn:>7}{row.shortfall:>7}"
            )
        return "\n".join(lines)


def stratified_sample(
    candidates: list[CaseCandidate],
    plan: SamplingPlan,
    diagrams: dict[str, LogicDiagram],
    seed: int,
    label_filter: dict[str, set] | None = None,
) -> SamplingOutcome:
    """Equal per-path quotas with the next-multiple overflow rule.

    A target not divisible by the path count is raised to the next multiple
    (e.g. 3 paths at target 100 draw 34 each, 102 total).  Under-populated
    paths contribute what they have; other paths stay at their quota.
    """
    eligible: list[CaseCandidate] = []
    for cand in candidates:
        if label_filter is not None:
            labels = label_filter.get(cand.record_id, set())
            human_positive = cand.diagnosis_id in labels
            if human_positive != (cand.polarity == "+"):
                continue
        eligible.append(cand)

    by_path: dict[tuple[str, str, str], list[CaseCandidate]] = {}
    for cand in eligible:
        key = (cand.diagnosis_id, cand.polarity, cand.result.path.path_id)
        by_path.setdefault(key, []).append(cand)

    selected: list[CaseCandidate] = []
    rows: list[SamplingRow] = []
    for dx in sorted(diagrams):
        pos_paths, neg_paths = paths_by_sign(diagrams[dx])
        for polarity, paths in (("+", pos_paths), ("-", neg_paths)):
            if not paths:
                continue
            target = plan.target_for(dx, polarity)
            quota = math.ceil(target / len(paths))
            for path in paths:
                pool = sorted(
                    by_path.get((dx, polarity, path.path_id), []),
                    key=lambda c: c.record_id,
                )
                rng = stable_rng(seed, dx, polarity, path.path_id)
                rng.shuffle(pool)
                drawn = pool[:quota]
                selected.extend(drawn)
                rows.append(
                    SamplingRow(
                        diagnosis_id=dx,
                        polarity=polarity,
                        path_id=path.path_id,
                        available=len(pool),
                        quota=quota,
                        drawn=len(drawn),
                    )
                )
    selected.sort(key=lambda c: (c.diagnosis_id, c.polarity, c.record_id))
    return SamplingOutcome(selected=selected, rows=rows)


# ---------------------------------------------------------------------------
# Stats and serialization
# ---------------------------------------------------------------------------

def dataset_stats(cases: list[BenchmarkCase]) -> dict:
    per_dx: dict[str, dict] = {}
    for case in cases:
        d = per_dx.setdefault(
            case.diagnosis_id, {"positive": 0, "negative": 0, "per_path": {}}
        )
        d["positive" if case.polarity == "+" else "negative"] += 1
        d["per_path"][case.path_id] = d["per_path"].get(case.path_id, 0) + 1
    reasoning = [c.n_reasoning_turns for c in cases]
    return {
        "n_cases": len(cases),
        "n_unique_records": len({c.record_id for c in cases}),
        "n_positive": sum(1 for c in cases if c.polarity == "+"),
        "n_negative": sum(1 for c in cases if c.polarity == "-"),
        "total_qa_pairs": sum(len(c.turns) for c in cases),
        "avg_reasoning_turns": (sum(reasoning) / len(reasoning)) if reasoning else 0.0,
        "per_diagnosis": {dx: per_dx[dx] for dx in sorted(per_dx)},
    }


def write_cases_jsonl(cases: list[BenchmarkCase], path: str | Path) -> None:
    ordered = sorted(cases, key=lambda c: c.case_id)
    with Path(path).open("w", encoding="utf-8") as fh:
        for case in ordered:
            fh.write(json.dumps(case.to_dict(), ensure_ascii=False) + "\n")


def read_cases_jsonl(path: str | Path) -> list[BenchmarkCase]:
    cases = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                cases.append(BenchmarkCase.from_dict(json.loads(line)))
    return cases
