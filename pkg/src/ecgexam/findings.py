"""Declarative clinical-finding criteria evaluated over measurements.

The criteria catalog is configuration, not code: each entry holds a
predicate tree, display/question strings, and a grounding declaration
(which evidence kinds the finding carries: leads, wave segments, and/or a
measured value).  Predicates use three-valued logic so criteria over
absent waves (e.g. PR on a P-less record) evaluate to not-present with a
reason instead of raising.

Predicate node forms (record level):
    {"all": [...]}, {"any": [...]}, {"not": node}
    {"majority": beat_node}    strictly more than half of defined beats
    {"exists": beat_node}      at least one beat
    {"record": {"field": f, "cmp": op, "value": v}}
    {"leads": {"group": name_or_list, "min": k, "agg": "majority"|"exists",
               "test": lead_node}}

Beat nodes: {"field"|"flag"|"all"|"any"|"not"|"sum": ...}
Lead nodes: {"field"|"flag"|"morphology"|"all"|"any"|"not": ...}
Comparators: > >= < <= == != between (value: [lo, hi], inclusive).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import features as ft
from .errors import SchemaError
from .leads import LEAD_GROUPS, canonical_sort, resolve_lead_group

GROUNDING_KINDS = ("lead", "wave", "measurement")
WAVE_SPANS = ("p", "qrs", "t", "pr", "qt", "st", "orphan_p")
_CMP_OPS = (">", ">=", "<", "<=", "==", "!=", "between")


@dataclass(frozen=True)
class GroundingSpec:
    kinds: tuple[str, ...]
    wave_span: str = "qrs"
    field: str | None = None
    unit: str | None = None
    leads: tuple[str, ...] | None = None  # fixed lead list; None = from trace

    @property
    def n_subtasks(self) -> int:
        return len(self.kinds)


@dataclass(frozen=True)
class CriterionSpec:
    finding_id: str
    display_name: str
    question: str
    short_phrase: str
    category: str
    predicate: dict
    grounding: GroundingSpec
    exclusive_with: tuple[str, ...] = ()
    notes: str = ""


@dataclass(frozen=True)
class Grounding:
    leads: list[str] = field(default_factory=list)
    segments: list[tuple[float, float]] = field(default_factory=list)  # seconds
    value: float | None = None
    unit: str | None = None

    def to_dict(self) -> dict:
        return {
            "leads": list(self.leads),
            "segments": [list(s) for s in self.segments],
            "value": self.value,
            "unit": self.unit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grounding":
        return cls(
            leads=list(d.get("leads", [])),
            segments=[tuple(s) for s in d.get("segments", [])],
            value=d.get("value"),
            unit=d.get("unit"),
        )


@dataclass(frozen=True)
class Finding:
    finding_id: str
    present: bool
    category: str
    display_name: str
    grounding: Grounding = field(default_factory=Grounding)
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "finding_id": self.finding_id,
            "present": self.present,
            "category": self.category,
            "display_name": self.display_name,
            "grounding": self.grounding.to_dict(),
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        return cls(
            finding_id=d["finding_id"],
            present=d["present"],
            category=d["category"],
            display_name=d["display_name"],
            grounding=Grounding.from_dict(d.get("grounding", {})),
            reason=d.get("reason"),
        )


# ---------------------------------------------------------------------------
# Catalog loading and validation
# ---------------------------------------------------------------------------

def default_catalog_path() -> Path:
    return Path(str(resources.files("ecgexam").joinpath("data/criteria.json")))


def load_catalog(path: str | Path | None = None) -> list[CriterionSpec]:
    """Load and validate a criteria catalog; duplicate ids are rejected."""
    path = Path(path) if path is not None else default_catalog_path()
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise IOError(f"catalog not found: {path}")
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", "/")
    return parse_catalog(data)


def parse_catalog(data) -> list[CriterionSpec]:
    if not isinstance(data, dict) or "criteria" not in data:
        raise SchemaError("catalog must be an object with a 'criteria' array", "/")
    entries = data["criteria"]
    if not isinstance(entries, list) or not entries:
        raise SchemaError("'criteria' must be a non-empty array", "/criteria")
    catalog: list[CriterionSpec] = []
    seen: set[str] = set()
    seen_names: set[str] = set()
    for i, entry in enumerate(entries):
        loc = f"/criteria/{i}"
        if not isinstance(entry, dict):
            raise SchemaError("criterion must be an object", loc)
        for key in ("finding_id", "display_name", "question", "category", "predicate", "grounding"):
            if key not in entry:
                raise SchemaError(f"missing required key {key!r}", loc)
        fid = entry["finding_id"]
        if fid in seen:
            raise SchemaError(f"duplicate finding_id {fid!r}", f"{loc}/finding_id")
        seen.add(fid)
        name = entry["display_name"]
        if name in seen_names:
            # Display names become answer options; duplicates would make
            # multiple-choice turns undecidable.
            raise SchemaError(f"duplicate display_name {name!r}", f"{loc}/display_name")
        seen_names.add(name)
        _validate_predicate(entry["predicate"], f"{loc}/predicate")
        grounding = _parse_grounding(entry["grounding"], f"{loc}/grounding")
        catalog.append(
            CriterionSpec(
                finding_id=fid,
                display_name=entry["display_name"],
                question=entry["question"],
                short_phrase=entry.get("short_phrase", entry["display_name"].lower()),
                category=entry["category"],
                predicate=entry["predicate"],
                grounding=grounding,
                exclusive_with=tuple(entry.get("exclusive_with", [])),
                notes=entry.get("notes", ""),
            )
        )
    ids = {c.finding_id for c in catalog}
    for i, c in enumerate(catalog):
        for other in c.exclusive_with:
            if other not in ids:
                raise SchemaError(f"exclusive_with references unknown id {other!r}", f"/criteria/{i}")
    return catalog


def _parse_grounding(raw, loc: str) -> GroundingSpec:
    if not isinstance(raw, dict) or "kinds" not in raw:
        raise SchemaError("grounding must be an object with 'kinds'", loc)
    kinds = tuple(raw["kinds"])
    if not kinds or any(k not in GROUNDING_KINDS for k in kinds):
        raise SchemaError(f"kinds must be a non-empty subset of {GROUNDING_KINDS}", f"{loc}/kinds")
    span = raw.get("wave_span", "qrs")
    if span not in WAVE_SPANS:
        raise SchemaError(f"unknown wave_span {span!r}", f"{loc}/wave_span")
    fieldname = raw.get("field")
    if "measurement" in kinds:
        if fieldname is None or raw.get("unit") is None:
            raise SchemaError("measurement grounding requires 'field' and 'unit'", loc)
        known = ft.BEAT_FIELDS | ft.LEAD_FIELDS | ft.RECORD_FIELDS
        if fieldname not in known:
            raise SchemaError(f"unknown measurement field {fieldname!r}", f"{loc}/field")
    leads = raw.get("leads")
    if leads is not None:
        try:
            leads = resolve_lead_group(leads)
        except KeyError as exc:
            raise SchemaError(str(exc), f"{loc}/leads")
    return GroundingSpec(
        kinds=kinds, wave_span=span, field=fieldname, unit=raw.get("unit"), leads=leads
    )


def _validate_predicate(node, loc: str, level: str = "record") -> None:
    if not isinstance(node, dict) or len(node) == 0:
        raise SchemaError("predicate node must be a non-empty object", loc)
    if "all" in node or "any" in node:
        key = "all" if "all" in node else "any"
        children = node[key]
        if not isinstance(children, list) or not children:
            raise SchemaError(f"'{key}' must hold a non-empty list", f"{loc}/{key}")
        for j, child in enumerate(children):
            _validate_predicate(child, f"{loc}/{key}/{j}", level)
        return
    if "not" in node:
        _validate_predicate(node["not"], f"{loc}/not", level)
        return
    if level == "record":
        if "majority" in node or "exists" in node:
            key = "majority" if "majority" in node else "exists"
            _validate_predicate(node[key], f"{loc}/{key}", "beat")
            return
        if "record" in node:
            spec = node["record"]
            _validate_cmp(spec, loc, ft.RECORD_FIELDS, set())
            return
        if "leads" in node:
            spec = node["leads"]
            if not isinstance(spec, dict):
                raise SchemaError("'leads' must be an object", loc)
            try:
                resolve_lead_group(spec.get("group", ()))
            except KeyError as exc:
                raise SchemaError(str(exc), f"{loc}/group")
            if not isinstance(spec.get("min"), int) or spec["min"] < 1:
                raise SchemaError("'min' must be a positive integer", f"{loc}/min")
            if spec.get("agg", "majority") not in ("majority", "exists"):
                raise SchemaError("agg must be 'majority' or 'exists'", f"{loc}/agg")
            _validate_predicate(spec.get("test", {}), f"{loc}/test", "lead")
            return
        raise SchemaError(f"unknown record-level node: {sorted(node)}", loc)
    if level == "beat":
        if "field" in node:
            _validate_cmp(node, loc, ft.BEAT_FIELDS, ft.BEAT_FLAGS)
            return
        if "flag" in node:
            if node["flag"] not in ft.BEAT_FLAGS:
                raise SchemaError(f"unknown beat flag {node['flag']!r}", loc)
            return
        if "sum" in node:
            terms = node["sum"]
            if not isinstance(terms, list) or not terms:
                raise SchemaError("'sum' must hold a non-empty list", loc)
            for j, term in enumerate(terms):
                if term.get("field") not in ft.LEAD_FIELDS or term.get("lead") not in LEAD_GROUPS["all"]:
                    raise SchemaError("sum terms need a lead field and lead", f"{loc}/sum/{j}")
            if node.get("cmp") not in _CMP_OPS or "value" not in node:
                raise SchemaError("sum needs 'cmp' and 'value'", loc)
            return
        raise SchemaError(f"unknown beat-level node: {sorted(node)}", loc)
    # lead level
    if "field" in node:
        _validate_cmp(node, loc, ft.LEAD_FIELDS, ft.LEAD_FLAGS)
        return
    if "flag" in node:
        if node["flag"] not in ft.LEAD_FLAGS:
            raise SchemaError(f"unknown lead flag {node['flag']!r}", loc)
        return
    if "morphology" in node:
        values = node["morphology"]
        values = [values] if isinstance(values, str) else values
        for v in values:
            if v not in ft.MORPHOLOGIES:
                raise SchemaError(f"unknown morphology {v!r}", loc)
        return
    raise SchemaError(f"unknown lead-level node: {sorted(node)}", loc)


def _validate_cmp(spec, loc: str, fields: set, flags: set) -> None:
    name = spec.get("field")
    if name not in fields and name not in flags:
        raise SchemaError(f"unknown field {name!r}", loc)
    if spec.get("cmp") not in _CMP_OPS:
        raise SchemaError(f"unknown comparator {spec.get('cmp')!r}", loc)
    if "value" not in spec:
        raise SchemaError("missing 'value'", loc)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class _Trace:
    beats: set = field(default_factory=set)
    leads: list = field(default_factory=list)

    def merge(self, other: "_Trace") -> "_Trace":
        leads = list(self.leads) + [l for l in other.leads if l not in self.leads]
        return _Trace(beats=self.beats | other.beats, leads=leads)


def _compare(value, op: str, target) -> bool:
    if op == ">":
        return value > target
    if op == ">=":
        return value >= target
    if op == "<":
        return value < target
    if op == "<=":
        return value <= target
    if op == "==":
        return value == target
    if op == "!=":
        return value != target
    if op == "between":
        lo, hi = target
        return lo <= value <= hi
    raise ValueError(f"unknown comparator {op!r}")


def _eval_lead_node(node: dict, beat: ft.BeatMeasurement, lead: str):
    if "all" in node:
        vals = [_eval_lead_node(c, beat, lead) for c in node["all"]]
        if any(v is False for v in vals):
            return False
        return None if any(v is None for v in vals) else True
    if "any" in node:
        vals = [_eval_lead_node(c, beat, lead) for c in node["any"]]
        if any(v is True for v in vals):
            return True
        return None if any(v is None for v in vals) else False
    if "not" in node:
        v = _eval_lead_node(node["not"], beat, lead)
        return None if v is None else (not v)
    lm = beat.leads.get(lead)
    if lm is None:
        return None
    if "flag" in node:
        return bool(getattr(lm, node["flag"]))
    if "morphology" in node:
        values = node["morphology"]
        values = [values] if isinstance(values, str) else values
        return lm.morphology in values
    if "field" in node:
        value = getattr(lm, node["field"])
        return None if value is None else _compare(value, node["cmp"], node["value"])
    raise ValueError(f"bad lead node: {node}")


def _eval_beat_node(node: dict, beat: ft.BeatMeasurement):
    if "all" in node:
        vals = [_eval_beat_node(c, beat) for c in node["all"]]
        if any(v is False for v in vals):
            return False
        return None if any(v is None for v in vals) else True
    if "any" in node:
        vals = [_eval_beat_node(c, beat) for c in node["any"]]
        if any(v is True for v in vals):
            return True
        return None if any(v is None for v in vals) else False
    if "not" in node:
        v = _eval_beat_node(node["not"], beat)
        return None if v is None else (not v)
    if "flag" in node:
        return bool(getattr(beat, node["flag"]))
    if "field" in node:
        value = getattr(beat, node["field"], None)
        return None if value is None else _compare(value, node["cmp"], node["value"])
    if "sum" in node:
        total = 0.0
        for term in node["sum"]:
            v = ft.lead_value(beat, term["lead"], term["field"])
            if v is None:
                return None
            total += v
        return _compare(total, node["cmp"], node["value"])
    raise ValueError(f"bad beat node: {node}")


def _aggregate(values: list, agg: str):
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    if agg == "exists":
        return any(defined)
    return sum(1 for v in defined if v) > len(defined) / 2


def _eval_record_node(node: dict, m: ft.RecordMeasurements):
    """Returns (value, defined, trace)."""
    if "all" in node:
        results = [_eval_record_node(c, m) for c in node["all"]]
        if any(v is False and d for v, d, _ in results):
            return False, True, _Trace()
        if any(not d for _, d, _ in results):
            return False, False, _Trace()
        trace = _Trace()
        for _, _, t in results:
            trace = trace.merge(t)
        return True, True, trace
    if "any" in node:
        saw_undefined = False
        for child in node["any"]:
            v, d, t = _eval_record_node(child, m)
            if v and d:
                return True, True, t
            if not d:
                saw_undefined = True
        return False, not saw_undefined, _Trace()
    if "not" in node:
        v, d, _ = _eval_record_node(node["not"], m)
        return (not v if d else False), d, _Trace()
    if "record" in node:
        spec = node["record"]
        value = m.record_field(spec["field"])
        if value is None:
            return False, False, _Trace()
        return _compare(value, spec["cmp"], spec["value"]), True, _Trace()
    if "majority" in node or "exists" in node:
        agg = "majority" if "majority" in node else "exists"
        inner = node[agg]
        vals = [_eval_beat_node(inner, b) for b in m.beats]
        result = _aggregate(vals, agg)
        if result is None:
            return False, False, _Trace()
        trace = _Trace(beats={b.index for b, v in zip(m.beats, vals) if v is True})
        return bool(result), True, trace if result else _Trace()
    if "leads" in node:
        spec = node["leads"]
        group = resolve_lead_group(spec["group"])
        agg = spec.get("agg", "majority")
        satisfied: list[str] = []
        beats: set[int] = set()
        any_defined = False
        for lead in group:
            vals = [_eval_lead_node(spec["test"], b, lead) for b in m.beats]
            lead_result = _aggregate(vals, agg)
            if lead_result is None:
                continue
            any_defined = True
            if lead_result:
                satisfied.append(lead)
                beats |= {b.index for b, v in zip(m.beats, vals) if v is True}
        if not any_defined:
            return False, False, _Trace()
        ok = len(satisfied) >= spec["min"]
        trace = _Trace(beats=beats, leads=canonical_sort(satisfied)) if ok else _Trace()
        return ok, True, trace
    raise ValueError(f"bad record node: {node}")


def _grounding_for(criterion: CriterionSpec, m: ft.RecordMeasurements, trace: _Trace) -> Grounding:
    gspec = criterion.grounding
    leads: list[str] = []
    if "lead" in gspec.kinds or gspec.field in ft.LEAD_FIELDS:
        leads = list(gspec.leads) if gspec.leads is not None else list(trace.leads)

    beat_idx = sorted(trace.beats) if trace.beats else [b.index for b in m.beats]
    by_index = {b.index: b for b in m.beats}

    segments: list[tuple[float, float]] = []
    fs = m.sampling_rate
    if gspec.wave_span == "orphan_p":
        spans = m.orphan_p_spans
    else:
        spans = [
            by_index[i].spans[gspec.wave_span]
            for i in beat_idx
            if gspec.wave_span in by_index[i].spans
        ]
    segments = [(on / fs, (off + 1) / fs) for on, off in spans]

    value = None
    if gspec.field is not None:
        if gspec.field in ft.RECORD_FIELDS:
            value = m.record_field(gspec.field)
        elif gspec.field in ft.BEAT_FIELDS:
            vals = [getattr(by_index[i], gspec.field) for i in beat_idx]
            vals = [v for v in vals if v is not None]
            value = float(np.median(vals)) if vals else None
        else:
            value_leads = leads or (list(gspec.leads) if gspec.leads else list(LEAD_GROUPS["all"]))
            vals = []
            for i in beat_idx:
                for lead in value_leads:
                    v = ft.lead_value(by_index[i], lead, gspec.field)
                    if v is not None:
                        vals.append(v)
            value = float(np.median(vals)) if vals else None
    return Grounding(leads=leads, segments=segments, value=value, unit=gspec.unit)


def evaluate_findings(m: ft.RecordMeasurements, catalog: list[CriterionSpec]) -> list[Finding]:
    """One Finding per criterion, with grounding evidence when present."""
    out: list[Finding] = []
    for criterion in catalog:
        value, defined, trace = _eval_record_node(criterion.predicate, m)
        present = bool(value and defined)
        if present:
            grounding = _grounding_for(criterion, m, trace)
            reason = None
        else:
            grounding = Grounding()
            reason = "predicate-false" if defined else "undefined-fields"
        out.append(
            Finding(
                finding_id=criterion.finding_id,
                present=present,
                category=criterion.category,
                display_name=criterion.display_name,
                grounding=grounding,
                reason=reason,
            )
        )
    return out


def findings_by_category(findings: list[Finding], category: str) -> list[Finding]:
    """Stable-ordered filter used by the distractor builder."""
    return [f for f in findings if f.category == category]
