"""Probability-map decoding, context-aware post-processing, and scoring.

The post-processing stages mirror the clinical clean-up applied after a
per-lead segmenter:

* P-wave recovery: template-guided peak search inside RR intervals that
  lack a P wave; a candidate is kept only when it lasts at least 60 ms,
  exceeds 5% of the adjacent QRS amplitude, and matches the lead's
  established P polarity.
* T-wave constraint: at most one T wave per RR interval, keeping the
  candidate whose timing best matches the running QT fraction.
* Multi-lead consensus: a wave must appear at a consistent temporal
  location on at least 4 leads; merged boundaries span the earliest onset
  to the latest offset of the contributing leads.

Boundary scoring follows the AAMI-style tolerance rule (150 ms default).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .leads import CONSENSUS_LEAD, LEADS
from .records import BACKGROUND_INDEX, DelineationMap, EcgRecord, WaveClass, WaveSegment

PROVENANCE_MAP = "probability-map"
PROVENANCE_ANNOTATION = "external-annotation"
PROVENANCE_SYNTHETIC = "synthetic-truth"

MIN_RUN_MS = 20.0
CONSENSUS_WINDOW_MS = 80.0
CONSENSUS_MIN_LEADS = 4
P_MIN_DURATION_MS = 60.0
P_AMPLITUDE_FRAC = 0.05
DEFAULT_QT_FRACTION = 0.40
# A P wave ending within this window before a QRS onset is attributed to that
# beat (its conducted P) rather than to the RR interval it sits in.
CONDUCTED_P_WINDOW_MS = 300.0

LeadSegments = dict[str, list[WaveSegment]]


def _sorted_segs(segs: list[WaveSegment]) -> list[WaveSegment]:
    return sorted(segs, key=lambda s: (s.onset, s.wave_class.value))


def _check_disjoint(lead: str, segs: list[WaveSegment]) -> None:
    by_class: dict[WaveClass, list[WaveSegment]] = {}
    for seg in segs:
        by_class.setdefault(seg.wave_class, []).append(seg)
    for cls, items in by_class.items():
        items = sorted(items, key=lambda s: s.onset)
        for a, b in zip(items, items[1:]):
            if b.onset <= a.offset:
                raise ValueError(f"overlapping {cls.value} segments on lead {lead}: {a} / {b}")


@dataclass(frozen=True)
class DelineationSet:
    """Per-lead and consensus segments for one record."""

    sampling_rate: int
    per_lead: LeadSegments
    consensus: list[WaveSegment]
    provenance: str
    record_id: str | None = None

    def __post_init__(self):
        per_lead = {lead: _sorted_segs(list(segs)) for lead, segs in self.per_lead.items()}
        for lead, segs in per_lead.items():
            _check_disjoint(lead, segs)
        consensus = _sorted_segs(list(self.consensus))
        _check_disjoint(CONSENSUS_LEAD, consensus)
        object.__setattr__(self, "per_lead", per_lead)
        object.__setattr__(self, "consensus", consensus)

    def consensus_of(self, cls: WaveClass) -> list[WaveSegment]:
        return [s for s in self.consensus if s.wave_class is cls]

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "sampling_rate": self.sampling_rate,
            "provenance": self.provenance,
            "per_lead": {lead: [s.to_dict() for s in segs] for lead, segs in self.per_lead.items()},
            "consensus": [s.to_dict() for s in self.consensus],
        }


@dataclass(frozen=True)
class PWaveTemplate:
    """Shape summary of the validated P waves on one lead."""

    lead: str
    mean_duration_ms: float
    mean_amplitude_mv: float
    polarity: str  # positive | negative | biphasic-pn | biphasic-np


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def decode_probability_map(
    dmap: DelineationMap,
    record: EcgRecord,
    min_run_ms: float = MIN_RUN_MS,
) -> LeadSegments:
    """Argmax decoding: runs of one non-background class become segments."""
    dmap.check_against(record)
    fs = record.sampling_rate
    min_samples = max(1, int(np.ceil(min_run_ms * fs / 1000.0)))
    out: LeadSegments = {}
    for li, lead in enumerate(LEADS):
        labels = np.argmax(dmap.probs[li], axis=1)
        x = record.samples[li].astype(np.float64)
        bg_idx = np.flatnonzero(labels == BACKGROUND_INDEX)
        segs: list[WaveSegment] = []
        if labels.size:
            change = np.flatnonzero(np.diff(labels)) + 1
            starts = np.concatenate(([0], change))
            ends = np.concatenate((change - 1, [labels.size - 1]))
            for start, end in zip(starts, ends):
                label = labels[start]
                if label == BACKGROUND_INDEX or (end - start + 1) < min_samples:
                    continue
                cls = WaveClass(("P", "QRS", "T")[label])
                peak = _run_peak(x, int(start), int(end), bg_idx, fs)
                segs.append(WaveSegment(cls, lead, int(start), int(end), peak))
        out[lead] = segs
    return out


def _run_peak(x: np.ndarray, start: int, end: int, bg_idx: np.ndarray, fs: int) -> int:
    base = _local_baseline(x, start, end, bg_idx, fs)
    window = np.abs(x[start:end + 1] - base)
    if window.max() < 1e-9:
        return start + (end - start) // 2
    return start + int(np.argmax(window))


def _local_baseline(x: np.ndarray, start: int, end: int, bg_idx: np.ndarray, fs: int) -> float:
    half = int(0.200 * fs)
    nearby = bg_idx[(bg_idx >= start - half) & (bg_idx <= end + half)]
    if nearby.size:
        return float(np.median(x[nearby]))
    if bg_idx.size:
        return float(np.median(x[bg_idx]))
    return 0.0


# ---------------------------------------------------------------------------
# P-wave recovery
# ---------------------------------------------------------------------------

def _polarity_of(x: np.ndarray, onset: int, offset: int, base: float) -> str:
    span = x[onset:offset + 1] - base
    pos = float(span.max(initial=0.0))
    neg = float(-span.min(initial=0.0))
    strongest = max(pos, neg)
    if strongest <= 0:
        return "positive"
    if min(pos, neg) >= 0.30 * strongest:
        return "biphasic-pn" if int(np.argmax(span)) <= int(np.argmin(span)) else "biphasic-np"
    return "positive" if pos >= neg else "negative"


def build_p_template(x: np.ndarray, fs: int, p_segs: list[WaveSegment], base: float, lead: str) -> PWaveTemplate:
    durations = [s.duration_ms(fs) for s in p_segs]
    amplitudes = [float(np.abs(x[s.onset:s.offset + 1] - base).max()) for s in p_segs]
    labels = [_polarity_of(x, s.onset, s.offset, base) for s in p_segs]
    order = ("positive", "negative", "biphasic-pn", "biphasic-np")
    counts = {lab: labels.count(lab) for lab in order}
    polarity = max(order, key=lambda lab: (counts[lab], -order.index(lab)))
    return PWaveTemplate(
        lead=lead,
        mean_duration_ms=float(np.mean(durations)),
        mean_amplitude_mv=float(np.mean(amplitudes)),
        polarity=polarity,
    )


def recover_p_waves(
    record: EcgRecord,
    per_lead: LeadSegments,
    min_duration_ms: float = P_MIN_DURATION_MS,
    amplitude_frac: float = P_AMPLITUDE_FRAC,
) -> LeadSegments:
    """Insert missed P waves inside RR gaps; never removes existing segments."""
    fs = record.sampling_rate
    out: LeadSegments = {}
    for lead, segs in per_lead.items():
        segs = _sorted_segs(list(segs))
        p_segs = [s for s in segs if s.wave_class is WaveClass.P]
        qrs = [s for s in segs if s.wave_class is WaveClass.QRS]
        if not p_segs or len(qrs) < 2:
            out[lead] = segs
            continue
        x = record.lead_signal(lead).astype(np.float64)
        occupied = np.zeros(record.n_samples, dtype=bool)
        for s in segs:
            occupied[s.onset:s.offset + 1] = True
        free_base = float(np.median(x[~occupied])) if (~occupied).any() else 0.0
        template = build_p_template(x, fs, p_segs, free_base, lead)

        added: list[WaveSegment] = []
        for a, b in zip(qrs, qrs[1:]):
            gap0, gap1 = a.offset + 1, b.onset - 1
            if gap1 <= gap0:
                continue
            in_gap = [p for p in p_segs if gap0 <= p.peak <= gap1]
            conducted = [
                p for p in in_gap
                if 0 <= (b.onset - p.offset) * 1000.0 / fs <= CONDUCTED_P_WINDOW_MS
            ]
            if conducted:
                attributed = max(conducted, key=lambda p: p.peak)
                in_gap = [p for p in in_gap if p is not attributed]
            if in_gap:
                continue
            added.extend(
                _search_gap(
                    x, fs, gap0, gap1, occupied, free_base, template,
                    (a, b), lead, min_duration_ms, amplitude_frac,
                )
            )
        out[lead] = _sorted_segs(segs + added)
    return out


def _search_gap(
    x: np.ndarray,
    fs: int,
    gap0: int,
    gap1: int,
    occupied: np.ndarray,
    base: float,
    template: PWaveTemplate,
    flanking_qrs: tuple[WaveSegment, WaveSegment],
    lead: str,
    min_duration_ms: float,
    amplitude_frac: float,
) -> list[WaveSegment]:
    candidates: list[tuple[float, int, int, int]] = []  # (amp, onset, peak, offset)
    floor = 0.01
    for s0, s1 in _free_runs(occupied, gap0, gap1):
        y = x[s0:s1 + 1] - base
        for signed in (y, -y):
            idxs, _ = find_peaks(signed, height=floor)
            for idx in idxs:
                peak = s0 + int(idx)
                amp = float(abs(x[peak] - base))
                onset, offset = _candidate_extent(x, base, peak, s0, s1, amp)
                candidates.append((amp, onset, peak, offset))
    candidates.sort(key=lambda c: (-c[0], c[1]))

    accepted: list[WaveSegment] = []
    for amp, onset, peak, offset in candidates:
        if any(onset <= s.offset and s.onset <= offset for s in accepted):
            continue
        duration = (offset - onset + 1) * 1000.0 / fs
        if duration < min_duration_ms:
            continue
        qrs_amp = _nearest_qrs_amplitude(x, base, peak, flanking_qrs)
        if not (amp > amplitude_frac * qrs_amp):
            continue
        if _polarity_of(x, onset, offset, base) != template.polarity:
            continue
        accepted.append(WaveSegment(WaveClass.P, lead, onset, offset, peak))
    return accepted


def _free_runs(occupied: np.ndarray, gap0: int, gap1: int):
    start = None
    for i in range(gap0, gap1 + 1):
        if not occupied[i]:
            if start is None:
                start = i
        elif start is not None:
            yield start, i - 1
            start = None
    if start is not None:
        yield start, gap1


def _candidate_extent(
    x: np.ndarray, base: float, peak: int, lo: int, hi: int, amp: float
) -> tuple[int, int]:
    floor = max(0.02 * amp, 1e-6)
    onset = peak
    while onset - 1 >= lo and abs(x[onset - 1] - base) > floor:
        onset -= 1
    offset = peak
    while offset + 1 <= hi and abs(x[offset + 1] - base) > floor:
        offset += 1
    return onset, offset


def _nearest_qrs_amplitude(
    x: np.ndarray, base: float, peak: int, flanking: tuple[WaveSegment, WaveSegment]
) -> float:
    a, b = flanking
    nearest = a if abs(peak - a.peak) <= abs(peak - b.peak) else b
    return float(np.abs(x[nearest.onset:nearest.offset + 1] - base).max())


# ---------------------------------------------------------------------------
# T-wave constraint
# ---------------------------------------------------------------------------

def enforce_t_constraints(per_lead: LeadSegments) -> LeadSegments:
    """Keep at most one T per RR interval; never creates segments."""
    out: LeadSegments = {}
    for lead, segs in per_lead.items():
        segs = _sorted_segs(list(segs))
        qrs = [s for s in segs if s.wave_class is WaveClass.QRS]
        ts = [s for s in segs if s.wave_class is WaveClass.T]
        if len(qrs) < 2 or not ts:
            out[lead] = segs
            continue

        intervals = list(zip(qrs, qrs[1:]))
        groups: list[list[WaveSegment]] = [[] for _ in intervals]
        loose: list[WaveSegment] = []
        for t in ts:
            placed = False
            for gi, (a, b) in enumerate(intervals):
                if a.offset < t.peak < b.onset:
                    groups[gi].append(t)
                    placed = True
                    break
            if not placed:
                loose.append(t)

        fractions = [
            (group[0].peak - a.onset) / (b.onset - a.onset)
            for group, (a, b) in zip(groups, intervals)
            if len(group) == 1
        ]
        f_med = float(np.median(fractions)) if fractions else DEFAULT_QT_FRACTION

        keep: list[WaveSegment] = list(loose)
        for group, (a, b) in zip(groups, intervals):
            if len(group) <= 1:
                keep.extend(group)
                continue
            rr = b.onset - a.onset
            keep.append(min(group, key=lambda t: (abs((t.peak - a.onset) / rr - f_med), t.peak)))

        survivors = set(id(t) for t in keep)
        out[lead] = [s for s in segs if s.wave_class is not WaveClass.T or id(s) in survivors]
    return out


# ---------------------------------------------------------------------------
# Multi-lead consensus
# ---------------------------------------------------------------------------

def build_consensus(
    per_lead: LeadSegments,
    sampling_rate: int,
    window_ms: float = CONSENSUS_WINDOW_MS,
    min_leads: int = CONSENSUS_MIN_LEADS,
    provenance: str = PROVENANCE_MAP,
    record_id: str | None = None,
) -> DelineationSet:
    """Cluster same-class segments across leads; 4-lead support required."""
    window = window_ms * sampling_rate / 1000.0
    consensus: list[WaveSegment] = []
    for cls in WaveClass:
        members: list[tuple[int, int, WaveSegment]] = []
        for lead, segs in per_lead.items():
            li = LEADS.index(lead) if lead in LEADS else len(LEADS)
            members.extend((s.peak, li, s) for s in segs if s.wave_class is cls)
        members.sort(key=lambda m: (m[0], m[1]))

        cluster: list[tuple[int, int, WaveSegment]] = []
        clusters: list[list[tuple[int, int, WaveSegment]]] = []
        for item in members:
            if cluster:
                centroid = float(np.mean([c[0] for c in cluster]))
                if abs(item[0] - centroid) > window:
                    clusters.append(cluster)
                    cluster = []
            cluster.append(item)
        if cluster:
            clusters.append(cluster)

        for cluster in clusters:
            lead_count = len({li for _, li, _ in cluster})
            if lead_count < min_leads:
                continue
            onset = min(s.onset for _, _, s in cluster)
            offset = max(s.offset for _, _, s in cluster)
            peak = int(round(float(np.median([s.peak for _, _, s in cluster]))))
            peak = min(max(peak, onset), offset)
            consensus.append(WaveSegment(cls, CONSENSUS_LEAD, onset, offset, peak))

    consensus = _merge_overlaps(consensus)
    return DelineationSet(
        sampling_rate=sampling_rate,
        per_lead=per_lead,
        consensus=consensus,
        provenance=provenance,
        record_id=record_id,
    )


def _merge_overlaps(segs: list[WaveSegment]) -> list[WaveSegment]:
    merged: list[WaveSegment] = []
    for cls in WaveClass:
        items = sorted((s for s in segs if s.wave_class is cls), key=lambda s: s.onset)
        for seg in items:
            if merged and merged[-1].wave_class is cls and seg.onset <= merged[-1].offset:
                prev = merged.pop()
                seg = WaveSegment(cls, CONSENSUS_LEAD, prev.onset, max(prev.offset, seg.offset), prev.peak)
            merged.append(seg)
    return merged


def delineation_from_segments(
    segments: list[WaveSegment],
    sampling_rate: int,
    record_id: str | None = None,
    provenance: str = PROVENANCE_SYNTHETIC,
) -> DelineationSet:
    """Group flat per-lead segments and derive consensus in one step."""
    per_lead: LeadSegments = {lead: [] for lead in LEADS}
    for seg in segments:
        per_lead.setdefault(seg.lead, []).append(seg)
    return build_consensus(per_lead, sampling_rate, provenance=provenance, record_id=record_id)


# ---------------------------------------------------------------------------
# Tolerance-based boundary scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryScore:
    tp: int = 0
    fn: int = 0
    fp: int = 0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 1.0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 1.0

    def merged(self, other: "BoundaryScore") -> "BoundaryScore":
        return BoundaryScore(self.tp + other.tp, self.fn + other.fn, self.fp + other.fp)


@dataclass(frozen=True)
class SegmentationScore:
    tolerance_ms: float
    scores: dict = field(default_factory=dict)  # (class, kind) -> BoundaryScore

    def score(self, cls: WaveClass, kind: str) -> BoundaryScore:
        return self.scores.get((cls.value, kind), BoundaryScore())

    def per_class(self, cls: WaveClass) -> BoundaryScore:
        return self.score(cls, "onset").merged(self.score(cls, "offset"))

    def overall(self) -> BoundaryScore:
        total = BoundaryScore()
        for value in self.scores.values():
            total = total.merged(value)
        return total

    def to_dict(self) -> dict:
        out = {"tolerance_ms": self.tolerance_ms, "boundaries": {}}
        for (cls, kind), sc in sorted(self.scores.items()):
            out["boundaries"][f"{cls}.{kind}"] = {
                "tp": sc.tp, "fn": sc.fn, "fp": sc.fp,
                "recall": sc.recall, "precision": sc.precision,
            }
        return out

    def to_table(self) -> str:
        lines = [f"tolerance: {self.tolerance_ms:g} ms",
                 f"{'boundary':<14}{'recall':>8}{'precision':>11}{'TP':>6}{'FN':>6}{'FP':>6}"]
        for cls in WaveClass:
            for kind in ("onset", "offset"):
                sc = self.score(cls, kind)
                lines.append(
                    f"{cls.value + ' ' + kind:<14}{sc.recall:>8.3f}{sc.precision:>11.3f}"
                    f"{sc.tp:>6}{sc.fn:>6}{sc.fp:>6}"
                )
        total = self.overall()
        lines.append(
            f"{'overall':<14}{total.recall:>8.3f}{total.precision:>11.3f}"
            f"{total.tp:>6}{total.fn:>6}{total.fp:>6}"
        )
        return "\n".join(lines)


def score_segmentation(
    predicted: DelineationSet,
    reference: DelineationSet,
    tolerance_ms: float = 150.0,
) -> SegmentationScore:
    """Greedy nearest-first one-to-one boundary matching within tolerance."""
    if predicted.sampling_rate != reference.sampling_rate:
        raise ValueError("predicted and reference sets use different sampling rates")
    if (
        predicted.record_id is not None
        and reference.record_id is not None
        and predicted.record_id != reference.record_id
    ):
        raise ValueError("predicted and reference sets reference different records")
    fs = predicted.sampling_rate

    keys = set()
    for dset in (predicted, reference):
        keys.update(lead for lead, segs in dset.per_lead.items() if segs)
        if dset.consensus:
            keys.add(CONSENSUS_LEAD)

    scores: dict[tuple[str, str], BoundaryScore] = {}
    for cls in WaveClass:
        for kind in ("onset", "offset"):
            tp = fn = fp = 0
            for key in sorted(keys):
                pred = _boundaries(predicted, key, cls, kind)
                ref = _boundaries(reference, key, cls, kind)
                matched = _greedy_match(pred, ref, fs, tolerance_ms)
                tp += matched
                fn += len(ref) - matched
                fp += len(pred) - matched
            scores[(cls.value, kind)] = BoundaryScore(tp=tp, fn=fn, fp=fp)
    return SegmentationScore(tolerance_ms=tolerance_ms, scores=scores)


def _boundaries(dset: DelineationSet, key: str, cls: WaveClass, kind: str) -> list[int]:
    segs = dset.consensus if key == CONSENSUS_LEAD else dset.per_lead.get(key, [])
    return [getattr(s, kind) for s in segs if s.wave_class is cls]


def _greedy_match(pred: list[int], ref: list[int], fs: int, tolerance_ms: float) -> int:
    pairs = []
    for pi, p in enumerate(pred):
        for ri, r in enumerate(ref):
            dist_ms = abs(p - r) * 1000.0 / fs
            if dist_ms <= tolerance_ms:
                pairs.append((dist_ms, min(p, r), max(p, r), pi, ri))
    pairs.sort()
    used_p: set[int] = set()
    used_r: set[int] = set()
    matched = 0
    for _, _, _, pi, ri in pairs:
        if pi in used_p or ri in used_r:
            continue
        used_p.add(pi)
        used_r.add(ri)
        matched += 1
    return matched
