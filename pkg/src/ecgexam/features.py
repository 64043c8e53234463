"""Per-beat quantification: intervals, amplitudes, morphology, and axis.

Beats are anchored on consensus QRS complexes.  All amplitudes are taken
relative to the per-beat isoelectric level (median of the PR segment, with
TP-segment and pre-QRS fallbacks), which makes every measurement invariant
to a uniform baseline offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .delineation import DelineationSet
from .errors import EmptyDelineation, UndefinedAxis
from .leads import LEADS
from .records import EcgRecord, WaveClass, WaveSegment

DEFLECTION_FLOOR_MV = 0.02
NOTCH_DIP_MV = 0.05
PATHOLOGICAL_Q_MS = 40.0
PATHOLOGICAL_Q_FRACTION = 0.25
AXIS_AREA_FLOOR = 1e-3  # mV*s
PREMATURE_RR_RATIO = 0.85
ST_SAMPLE_OFFSET_MS = 60.0

MORPHOLOGIES = ("qR", "rS", "RSR'", "QS", "R-monophasic", "other")


@dataclass(frozen=True)
class Beat:
    index: int
    qrs: WaveSegment
    p: WaveSegment | None = None
    t: WaveSegment | None = None


@dataclass(frozen=True)
class BeatGrouping:
    beats: list[Beat]
    orphan_p: list[WaveSegment]


@dataclass(frozen=True)
class Deflection:
    label: str  # Q | R | S | R' | ?
    onset: int
    peak: int
    offset: int
    amplitude_mv: float  # signed


@dataclass
class LeadBeatMeasurement:
    r_mv: float = 0.0
    s_mv: float = 0.0
    q_mv: float = 0.0
    r_prime_mv: float = 0.0
    s_depth_mv: float = 0.0
    p_mv: float = 0.0
    t_mv: float = 0.0
    st_mv: float = 0.0
    st_j_mv: float = 0.0
    q_dur_ms: float = 0.0
    s_dur_ms: float = 0.0
    morphology: str = "other"
    notched_r: bool = False
    pathological_q: bool = False
    dominant_s: bool = False
    dominant_r: bool = False
    deflections: list[Deflection] = field(default_factory=list)


@dataclass
class BeatMeasurement:
    index: int
    qrs_dur_ms: float
    p_dur_ms: float | None = None
    t_dur_ms: float | None = None
    pr_ms: float | None = None
    rr_ms: float | None = None
    qt_ms: float | None = None
    axis_deg: float | None = None
    rr_ratio: float | None = None
    premature: bool = False
    p_present: bool = False
    t_present: bool = False
    sokolow_mv: float = 0.0
    cornell_mv: float = 0.0
    r_avl_mv: float = 0.0
    leads: dict[str, LeadBeatMeasurement] = field(default_factory=dict)
    spans: dict[str, tuple[int, int]] = field(default_factory=dict)


@dataclass
class RecordMeasurements:
    record_id: str
    sampling_rate: int
    duration_s: float
    beats: list[BeatMeasurement]
    orphan_p_spans: list[tuple[int, int]]
    n_orphan_p: int
    atrial_rate_bpm: float | None
    ventricular_rate_bpm: float | None
    av_rate_gap_bpm: float | None
    pr_range_ms: float | None
    median_rr_ms: float | None
    median_pr_ms: float | None
    median_qrs_ms: float | None
    median_qt_ms: float | None
    median_axis_deg: float | None
    qrs_onsets_s: list[float]

    @property
    def n_beats(self) -> int:
        return len(self.beats)

    def record_field(self, name: str):
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "sampling_rate": self.sampling_rate,
            "duration_s": self.duration_s,
            "n_beats": self.n_beats,
            "n_orphan_p": self.n_orphan_p,
            "atrial_rate_bpm": self.atrial_rate_bpm,
            "ventricular_rate_bpm": self.ventricular_rate_bpm,
            "av_rate_gap_bpm": self.av_rate_gap_bpm,
            "pr_range_ms": self.pr_range_ms,
            "median_rr_ms": self.median_rr_ms,
            "median_pr_ms": self.median_pr_ms,
            "median_qrs_ms": self.median_qrs_ms,
            "median_qt_ms": self.median_qt_ms,
            "median_axis_deg": self.median_axis_deg,
            "qrs_onsets_s": self.qrs_onsets_s,
            "orphan_p_spans": self.orphan_p_spans,
            "beats": [
                {
                    "index": b.index,
                    "qrs_dur_ms": b.qrs_dur_ms,
                    "p_dur_ms": b.p_dur_ms,
                    "t_dur_ms": b.t_dur_ms,
                    "pr_ms": b.pr_ms,
                    "rr_ms": b.rr_ms,
                    "qt_ms": b.qt_ms,
                    "axis_deg": b.axis_deg,
                    "rr_ratio": b.rr_ratio,
                    "premature": b.premature,
                    "p_present": b.p_present,
                    "t_present": b.t_present,
                    "sokolow_mv": b.sokolow_mv,
                    "cornell_mv": b.cornell_mv,
                    "r_avl_mv": b.r_avl_mv,
                    "spans": {k: list(v) for k, v in sorted(b.spans.items())},
                    "leads": {
                        lead: {
                            "r_mv": lm.r_mv, "s_mv": lm.s_mv, "q_mv": lm.q_mv,
                            "r_prime_mv": lm.r_prime_mv, "s_depth_mv": lm.s_depth_mv,
                            "p_mv": lm.p_mv, "t_mv": lm.t_mv,
                            "st_mv": lm.st_mv, "st_j_mv": lm.st_j_mv,
                            "q_dur_ms": lm.q_dur_ms, "s_dur_ms": lm.s_dur_ms,
                            "morphology": lm.morphology,
                            "notched_r": lm.notched_r,
                            "pathological_q": lm.pathological_q,
                            "dominant_s": lm.dominant_s,
                            "dominant_r": lm.dominant_r,
                        }
                        for lead, lm in sorted(b.leads.items())
                    },
                }
                for b in self.beats
            ],
        }


# Fields the criteria language may reference.
BEAT_FIELDS = {
    "p_dur_ms", "qrs_dur_ms", "t_dur_ms", "pr_ms", "rr_ms", "qt_ms",
    "axis_deg", "rr_ratio", "sokolow_mv", "cornell_mv", "r_avl_mv",
}
BEAT_FLAGS = {"premature", "p_present", "t_present"}
LEAD_FIELDS = {
    "r_mv", "s_mv", "q_mv", "r_prime_mv", "s_depth_mv", "p_mv", "t_mv",
    "st_mv", "st_j_mv", "q_dur_ms", "s_dur_ms",
}
LEAD_FLAGS = {"notched_r", "pathological_q", "dominant_s", "dominant_r"}
DOMINANT_MIN_MV = 0.1  # smallest deflection that can count as dominant
RECORD_FIELDS = {
    "n_beats", "n_orphan_p", "atrial_rate_bpm", "ventricular_rate_bpm",
    "av_rate_gap_bpm", "pr_range_ms", "median_rr_ms", "median_pr_ms",
    "median_qrs_ms", "median_qt_ms", "median_axis_deg",
}


def beat_value(beat: BeatMeasurement, name: str):
    if name in BEAT_FIELDS:
        return getattr(beat, name)
    if name in BEAT_FLAGS:
        return getattr(beat, name)
    raise KeyError(f"unknown beat field: {name}")


def lead_value(beat: BeatMeasurement, lead: str, name: str):
    lm = beat.leads.get(lead)
    if lm is None:
        return None
    if name in LEAD_FIELDS or name in LEAD_FLAGS or name == "morphology":
        return getattr(lm, name)
    raise KeyError(f"unknown lead field: {name}")


# ---------------------------------------------------------------------------
# Beat assembly
# ---------------------------------------------------------------------------

def group_beats(delineation: DelineationSet) -> BeatGrouping:
    """Anchor one beat per consensus QRS; attach the nearest P and T."""
    qrs = delineation.consensus_of(WaveClass.QRS)
    if not qrs:
        raise EmptyDelineation("no consensus QRS complexes")
    ps = delineation.consensus_of(WaveClass.P)
    ts = delineation.consensus_of(WaveClass.T)

    beats: list[Beat] = []
    attached: set[int] = set()
    for k, q in enumerate(qrs):
        gap_start = qrs[k - 1].offset if k > 0 else -1
        candidates = [
            (i, p) for i, p in enumerate(ps)
            if gap_start < p.peak < q.onset and p.offset < q.onset
        ]
        p_seg = None
        if candidates:
            i, p_seg = max(candidates, key=lambda item: item[1].peak)
            attached.add(i)
        next_onset = qrs[k + 1].onset if k + 1 < len(qrs) else math.inf
        t_candidates = [t for t in ts if q.offset < t.peak < next_onset]
        t_seg = min(t_candidates, key=lambda t: t.peak) if t_candidates else None
        beats.append(Beat(index=k, qrs=q, p=p_seg, t=t_seg))

    orphans = [p for i, p in enumerate(ps) if i not in attached]
    return BeatGrouping(beats=beats, orphan_p=orphans)


# ---------------------------------------------------------------------------
# Waveform helpers
# ---------------------------------------------------------------------------

def _isoelectric(x: np.ndarray, beat: Beat, prev: Beat | None, fs: int) -> float:
    if beat.p is not None:
        lo, hi = beat.p.offset + 1, beat.qrs.onset - 1
        if hi >= lo:
            return float(np.median(x[lo:hi + 1]))
    if prev is not None and prev.t is not None:
        lo, hi = prev.t.offset + 1, beat.qrs.onset - 1
        if hi >= lo:
            return float(np.median(x[lo:hi + 1]))
    lo = max(0, beat.qrs.onset - int(0.080 * fs))
    hi = beat.qrs.onset - 1
    if hi >= lo:
        return float(np.median(x[lo:hi + 1]))
    return float(np.median(x)) if x.size else 0.0


def _extract_deflections(y: np.ndarray, onset: int, floor: float = DEFLECTION_FLOOR_MV) -> list[Deflection]:
    """Split a baseline-corrected QRS window into signed lobes and label them."""
    signs = np.zeros(y.size, dtype=np.int8)
    signs[y > floor] = 1
    signs[y < -floor] = -1
    lobes: list[tuple[int, int, int]] = []  # (sign, start, end)
    start = None
    current = 0
    for i, s in enumerate(signs):
        if s != 0 and start is None:
            start, current = i, s
        elif start is not None and s != current:
            lobes.append((current, start, i - 1))
            start, current = (i, s) if s != 0 else (None, 0)
    if start is not None:
        lobes.append((current, start, y.size - 1))

    out: list[Deflection] = []
    have = {"Q": False, "R": False, "S": False, "R'": False}
    for sign, lo, hi in lobes:
        window = y[lo:hi + 1]
        idx = int(np.argmax(window)) if sign > 0 else int(np.argmin(window))
        amp = float(window[idx])
        if sign < 0 and not have["R"] and not have["Q"]:
            label = "Q"
        elif sign > 0 and not have["R"]:
            label = "R"
        elif sign < 0 and have["R"] and not have["S"]:
            label = "S"
        elif sign > 0 and have["R"] and have["S"] and not have["R'"]:
            label = "R'"
        else:
            label = "?"
        if label in have:
            have[label] = True
        out.append(Deflection(label, onset + lo, onset + lo + idx, onset + hi, amp))
    return out


def _morphology_of(deflections: list[Deflection]) -> str:
    pattern = tuple(d.label for d in deflections)
    mapping = {
        ("R",): "R-monophasic",
        ("Q",): "QS",
        ("Q", "R"): "qR",
        ("R", "S"): "rS",
        ("R", "S", "R'"): "RSR'",
    }
    return mapping.get(pattern, "other")


def _notched(y: np.ndarray, deflections: list[Deflection], onset: int) -> bool:
    r = next((d for d in deflections if d.label == "R"), None)
    if r is None:
        return False
    lobe = y[r.onset - onset:r.offset - onset + 1]
    if lobe.size < 3:
        return False
    peaks, _ = find_peaks(lobe)
    if peaks.size < 2:
        return False
    top = sorted(sorted(peaks, key=lambda i: -lobe[i])[:2])
    valley = float(lobe[top[0]:top[1] + 1].min())
    return min(float(lobe[top[0]]), float(lobe[top[1]])) - valley >= NOTCH_DIP_MV


def _pathological_q(deflections: list[Deflection], fs: int) -> bool:
    q = next((d for d in deflections if d.label == "Q"), None)
    r = next((d for d in deflections if d.label == "R"), None)
    if q is None or r is None:
        return False
    q_dur = (q.offset - q.onset + 1) * 1000.0 / fs
    return q_dur >= PATHOLOGICAL_Q_MS or abs(q.amplitude_mv) >= PATHOLOGICAL_Q_FRACTION * r.amplitude_mv


def classify_morphology(
    record: EcgRecord, beat: Beat, lead: str, prev: Beat | None = None
) -> tuple[str, bool, bool]:
    """Morphology label plus notched-R and pathological-Q flags for one lead."""
    fs = record.sampling_rate
    x = record.lead_signal(lead).astype(np.float64)
    iso = _isoelectric(x, beat, prev, fs)
    y = x[beat.qrs.onset:beat.qrs.offset + 1] - iso
    deflections = _extract_deflections(y, beat.qrs.onset)
    return (
        _morphology_of(deflections),
        _notched(y, deflections, beat.qrs.onset),
        _pathological_q(deflections, fs),
    )


def frontal_axis(net_area_i: float, net_area_avf: float, floor: float = AXIS_AREA_FLOOR) -> float:
    """Frontal-plane axis in degrees within (-180, 180] from lead I/aVF net areas."""
    if abs(net_area_i) < floor and abs(net_area_avf) < floor:
        raise UndefinedAxis(
            f"net QRS areas below floor (|I|={abs(net_area_i):.2e}, |aVF|={abs(net_area_avf):.2e})"
        )
    deg = math.degrees(math.atan2(net_area_avf, net_area_i))
    if deg <= -180.0:
        deg += 360.0
    return deg


# ---------------------------------------------------------------------------
# Full measurement pass
# ---------------------------------------------------------------------------

def _signed_extremum(y: np.ndarray) -> float:
    if y.size == 0:
        return 0.0
    i = int(np.argmax(np.abs(y)))
    return float(y[i])


def measure(record: EcgRecord, grouping: BeatGrouping) -> RecordMeasurements:
    """Quantify every beat of ``grouping`` against the record's signals."""
    if not grouping.beats:
        raise EmptyDelineation("no beats to measure")
    fs = record.sampling_rate
    n = record.n_samples
    signals = {lead: record.lead_signal(lead).astype(np.float64) for lead in LEADS}
    st_off = round(ST_SAMPLE_OFFSET_MS * fs / 1000.0)

    rows: list[BeatMeasurement] = []
    for k, beat in enumerate(grouping.beats):
        prev = grouping.beats[k - 1] if k > 0 else None
        q = beat.qrs
        bm = BeatMeasurement(
            index=beat.index,
            qrs_dur_ms=q.duration_samples() * 1000.0 / fs,
            p_present=beat.p is not None,
            t_present=beat.t is not None,
        )
        bm.spans["qrs"] = (q.onset, q.offset)
        if beat.p is not None:
            bm.p_dur_ms = beat.p.duration_samples() * 1000.0 / fs
            bm.pr_ms = (q.onset - beat.p.onset) * 1000.0 / fs
            bm.spans["p"] = (beat.p.onset, beat.p.offset)
            bm.spans["pr"] = (beat.p.onset, q.onset)
        if beat.t is not None:
            bm.t_dur_ms = beat.t.duration_samples() * 1000.0 / fs
            bm.qt_ms = (beat.t.offset + 1 - q.onset) * 1000.0 / fs
            bm.spans["t"] = (beat.t.onset, beat.t.offset)
            bm.spans["qt"] = (q.onset, beat.t.offset)
            bm.spans["st"] = (q.offset, beat.t.onset)
        if prev is not None:
            bm.rr_ms = (q.onset - prev.qrs.onset) * 1000.0 / fs

        areas: dict[str, float] = {}
        for lead in LEADS:
            x = signals[lead]
            iso = _isoelectric(x, beat, prev, fs)
            y = x[q.onset:q.offset + 1] - iso
            deflections = _extract_deflections(y, q.onset)
            lm = LeadBeatMeasurement(deflections=deflections)
            for d in deflections:
                if d.label == "R":
                    lm.r_mv = d.amplitude_mv
                elif d.label == "S":
                    lm.s_mv = d.amplitude_mv
                    lm.s_dur_ms = (d.offset - d.onset + 1) * 1000.0 / fs
                elif d.label == "Q":
                    lm.q_mv = d.amplitude_mv
                    lm.q_dur_ms = (d.offset - d.onset + 1) * 1000.0 / fs
                elif d.label == "R'":
                    lm.r_prime_mv = d.amplitude_mv
            lm.morphology = _morphology_of(deflections)
            lm.s_depth_mv = abs(lm.s_mv) if lm.s_mv else (abs(lm.q_mv) if lm.morphology == "QS" else 0.0)
            lm.notched_r = _notched(y, deflections, q.onset)
            lm.pathological_q = _pathological_q(deflections, fs)
            lm.dominant_s = lm.s_depth_mv >= DOMINANT_MIN_MV and lm.s_depth_mv > lm.r_mv
            lm.dominant_r = lm.r_mv >= 0.5 and lm.r_mv > lm.s_depth_mv
            if beat.p is not None:
                lm.p_mv = _signed_extremum(x[beat.p.onset:beat.p.offset + 1] - iso)
            if beat.t is not None:
                lm.t_mv = _signed_extremum(x[beat.t.onset:beat.t.offset + 1] - iso)
            j = min(q.offset + 1, n - 1)
            lm.st_j_mv = float(x[j] - iso)
            lm.st_mv = float(x[min(q.offset + st_off, n - 1)] - iso)
            areas[lead] = float(np.sum(y)) / fs
            bm.leads[lead] = lm

        try:
            bm.axis_deg = frontal_axis(areas["I"], areas["aVF"])
        except UndefinedAxis:
            bm.axis_deg = None
        v1 = bm.leads["V1"]
        bm.sokolow_mv = v1.s_depth_mv + max(bm.leads["V5"].r_mv, bm.leads["V6"].r_mv)
        bm.cornell_mv = bm.leads["aVL"].r_mv + bm.leads["V3"].s_depth_mv
        bm.r_avl_mv = bm.leads["aVL"].r_mv
        rows.append(bm)

    rrs = [b.rr_ms for b in rows if b.rr_ms is not None]
    median_rr = float(np.median(rrs)) if rrs else None
    for b in rows:
        if b.rr_ms is not None and median_rr:
            b.rr_ratio = b.rr_ms / median_rr
            b.premature = b.rr_ratio < PREMATURE_RR_RATIO

    prs = [b.pr_ms for b in rows if b.pr_ms is not None]
    p_onsets = sorted(
        [beat.p.onset for beat in grouping.beats if beat.p is not None]
        + [p.onset for p in grouping.orphan_p]
    )
    pp = np.diff(p_onsets) * 1000.0 / fs if len(p_onsets) >= 2 else []
    # Lower-quartile P-P interval: equals the base interval on regular trains
    # and stays on it when dissociated P waves are hidden inside QRS/T spans.
    atrial = 60000.0 / float(np.percentile(pp, 25)) if len(pp) else None
    ventricular = 60000.0 / median_rr if median_rr else None
    av_gap = (atrial - ventricular) if (atrial is not None and ventricular is not None) else None

    def _median(values):
        vals = [v for v in values if v is not None]
        return float(np.median(vals)) if vals else None

    return RecordMeasurements(
        record_id=record.id,
        sampling_rate=fs,
        duration_s=record.duration_s,
        beats=rows,
        orphan_p_spans=[(p.onset, p.offset) for p in grouping.orphan_p],
        n_orphan_p=len(grouping.orphan_p),
        atrial_rate_bpm=atrial,
        ventricular_rate_bpm=ventricular,
        av_rate_gap_bpm=av_gap,
        pr_range_ms=(max(prs) - min(prs)) if len(prs) >= 2 else None,
        median_rr_ms=median_rr,
        median_pr_ms=_median([b.pr_ms for b in rows]),
        median_qrs_ms=_median([b.qrs_dur_ms for b in rows]),
        median_qt_ms=_median([b.qt_ms for b in rows]),
        median_axis_deg=_median([b.axis_deg for b in rows]),
        qrs_onsets_s=[beat.qrs.onset / fs for beat in grouping.beats],
    )
