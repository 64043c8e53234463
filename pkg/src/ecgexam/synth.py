"""Parametric 12-lead generator with exact ground-truth wave boundaries.

Waves are analytically simple shapes: raised-cosine lobes for P and T, a
triangular R with optional Q/S/R' deflections (an explicit M-shape when a
notch is requested), and a flat ST plateau after the J point.  Limb leads
scale the reference amplitudes by the hexaxial cosine projection of the
frontal axis; chest leads use fixed per-lead factors.  Because every wave
is placed on an exact sample grid, the emitted segments reproduce the
requested timings to the sample and the generator doubles as the oracle
for the downstream pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import SpecError
from .leads import LEADS, wave_scale
from .records import BACKGROUND_INDEX, DelineationMap, EcgRecord, WaveClass, WaveSegment

ECTOPIC_KINDS = ("atrial-premature", "ventricular-premature")
PREMATURITY = 0.70  # ectopic RR as a fraction of the nominal RR
PVC_MIN_QRS_MS = 140.0

# Relative widths of the QRS sub-deflections when present.
_QRS_WEIGHTS = {"q": 2.0, "r": 4.0, "s": 3.0, "r_prime": 3.0}
_OVERRIDE_KEYS = ("p_amp", "q_amp", "r_amp", "s_amp", "r_prime_amp", "t_amp", "st_shift_mv")


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for one strip.  Amplitudes are reference millivolts; ``q_amp``
    and ``s_amp`` are magnitudes of negative deflections."""

    heart_rate: float = 60.0
    pr_ms: float = 160.0
    qrs_ms: float = 90.0
    qt_ms: float = 380.0
    p_dur_ms: float = 90.0
    t_dur_ms: float = 160.0
    p_amp: float = 0.15
    r_amp: float = 1.0
    q_amp: float = 0.0
    s_amp: float = 0.0
    r_prime_amp: float = 0.0
    t_amp: float = 0.30
    notch_depth: float = 0.0
    axis_deg: float = 60.0
    st_shift_mv: float = 0.0
    st_lead_shifts: Mapping[str, float] = field(default_factory=dict)
    lead_overrides: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    ectopic_schedule: tuple[tuple[int, str], ...] = ()
    dropped_qrs_schedule: tuple[int, ...] = ()
    av_dissociation: bool = False
    atrial_rate_bpm: float | None = None
    duration_s: float = 10.0
    sampling_rate: int = 100
    noise_mv: float = 0.0
    record_id: str = "synthetic"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ectopic_schedule", tuple((int(i), k) for i, k in self.ectopic_schedule))
        object.__setattr__(self, "dropped_qrs_schedule", tuple(int(i) for i in self.dropped_qrs_schedule))
        for name in ("heart_rate", "pr_ms", "qrs_ms", "qt_ms", "p_dur_ms", "t_dur_ms", "duration_s"):
            if getattr(self, name) <= 0:
                raise SpecError(f"{name} must be positive")
        if self.sampling_rate <= 0 or int(self.sampling_rate) != self.sampling_rate:
            raise SpecError("sampling_rate must be a positive integer")
        if self.pr_ms < self.p_dur_ms:
            raise SpecError(f"pr_ms ({self.pr_ms}) must be >= p_dur_ms ({self.p_dur_ms})")
        if self.qt_ms < self.qrs_ms + self.t_dur_ms:
            raise SpecError("qt_ms must cover the QRS and T durations")
        for _, kind in self.ectopic_schedule:
            if kind not in ECTOPIC_KINDS:
                raise SpecError(f"unknown ectopic kind: {kind!r}")
        for lead in list(self.st_lead_shifts) + list(self.lead_overrides):
            if lead not in LEADS:
                raise SpecError(f"unknown lead in spec: {lead!r}")
        for lead, over in self.lead_overrides.items():
            for key in over:
                if key not in _OVERRIDE_KEYS:
                    raise SpecError(f"unknown override key {key!r} for lead {lead}")
        if self.av_dissociation and self.atrial_rate_bpm is None:
            raise SpecError("av_dissociation requires atrial_rate_bpm")


@dataclass(frozen=True)
class SynthesisResult:
    record: EcgRecord
    segments: list[WaveSegment]
    expected: dict

    def segments_by_lead(self) -> dict[str, list[WaveSegment]]:
        out: dict[str, list[WaveSegment]] = {lead: [] for lead in LEADS}
        for seg in self.segments:
            out[seg.lead].append(seg)
        for lead in out:
            out[lead].sort(key=lambda s: (s.onset, s.wave_class.value))
        return out


def _ms_to_n(ms: float, fs: int) -> int:
    return max(1, round(ms * fs / 1000.0))


def _raised_cosine(n: int, amp: float) -> np.ndarray:
    if n == 1:
        return np.array([amp])
    phase = np.arange(n) / (n - 1)
    return amp * 0.5 * (1.0 - np.cos(2.0 * np.pi * phase))


def _triangle(n: int, amp: float) -> np.ndarray:
    if n == 1:
        return np.array([amp])
    center = (n - 1) / 2.0
    return amp * (1.0 - np.abs(np.arange(n) - center) / (center + 1.0))


def _notched_lobe(n: int, amp: float, depth: float) -> np.ndarray:
    """Piecewise-linear M shape: two equal apices with a valley ``depth`` below."""
    anchors_x = [0, max(1, round(0.3 * (n - 1))), round(0.5 * (n - 1)), min(n - 2, round(0.7 * (n - 1))), n - 1]
    anchors_y = [0.0, amp, amp - depth if amp >= 0 else amp + depth, amp, 0.0]
    xs, ys = [], []
    for x, y in zip(anchors_x, anchors_y):
        if not xs or x > xs[-1]:
            xs.append(x)
            ys.append(y)
    return np.interp(np.arange(n), xs, ys)


def _qrs_widths(qrs_n: int, present: list[str]) -> dict[str, int]:
    total = sum(_QRS_WEIGHTS[c] for c in present)
    widths = {c: max(1, int(qrs_n * _QRS_WEIGHTS[c] / total)) for c in present}
    diff = qrs_n - sum(widths.values())
    sink = "r" if "r" in present else present[0]
    widths[sink] += diff
    if widths[sink] < 1:
        raise SpecError("QRS too short for the requested deflections")
    return widths


def _lead_amplitudes(spec: SyntheticSpec, lead: str) -> dict[str, float]:
    pf, qf, tf = wave_scale(lead, spec.axis_deg)
    amps = {
        "p_amp": spec.p_amp * pf,
        "q_amp": -spec.q_amp * qf,
        "r_amp": spec.r_amp * qf,
        "s_amp": -spec.s_amp * qf,
        "r_prime_amp": spec.r_prime_amp * qf,
        "t_amp": spec.t_amp * tf,
        "st_shift_mv": spec.st_shift_mv * tf,
    }
    if lead in spec.st_lead_shifts:
        amps["st_shift_mv"] = float(spec.st_lead_shifts[lead])
    for key, value in spec.lead_overrides.get(lead, {}).items():
        if key in ("q_amp", "s_amp"):
            amps[key] = -abs(float(value))
        else:
            amps[key] = float(value)
    return amps


@dataclass
class _BeatPlan:
    index: int
    qrs_onset_idx: int
    qrs_n: int
    has_p: bool
    has_qrs: bool
    premature: bool
    kind: str  # "normal" | "atrial-premature" | "ventricular-premature" | "dropped"


def _plan_beats(spec: SyntheticSpec) -> tuple[list[_BeatPlan], int]:
    fs = spec.sampling_rate
    rr_ms = 60000.0 / spec.heart_rate
    start_ms = 80.0
    duration_ms = spec.duration_s * 1000.0

    nominal = []
    k = 0
    while True:
        onset_ms = start_ms + spec.pr_ms + k * rr_ms
        if onset_ms + spec.qt_ms > duration_ms - 20.0:
            break
        nominal.append(onset_ms)
        k += 1
    n_beats = len(nominal)
    if n_beats == 0:
        raise SpecError("strip too short for a single beat")

    ectopics = dict(spec.ectopic_schedule)
    for idx in list(ectopics) + list(spec.dropped_qrs_schedule):
        if idx < 0 or idx >= n_beats:
            raise SpecError(f"schedule references beat {idx} beyond the strip ({n_beats} beats)")
    for idx in ectopics:
        if idx == 0:
            raise SpecError("ectopic beat needs a preceding beat")
        if idx in spec.dropped_qrs_schedule:
            raise SpecError(f"beat {idx} cannot be both ectopic and dropped")

    plans: list[_BeatPlan] = []
    for k in range(n_beats):
        kind = "normal"
        onset_ms = nominal[k]
        premature = False
        if k in spec.dropped_qrs_schedule:
            kind = "dropped"
        elif k in ectopics:
            kind = ectopics[k]
            onset_ms = nominal[k - 1] + PREMATURITY * rr_ms
            premature = True
            prev_t_end = nominal[k - 1] + spec.qt_ms
            lead_in = spec.pr_ms if kind == "atrial-premature" else 0.0
            if onset_ms - lead_in <= prev_t_end:
                raise SpecError(f"ectopic beat {k} overlaps the previous beat")
        qrs_ms = spec.qrs_ms
        if kind == "ventricular-premature":
            qrs_ms = max(PVC_MIN_QRS_MS, 1.5 * spec.qrs_ms)
        plans.append(
            _BeatPlan(
                index=k,
                qrs_onset_idx=round(onset_ms * fs / 1000.0),
                qrs_n=_ms_to_n(qrs_ms, fs),
                has_p=(kind not in ("ventricular-premature",)) and not spec.av_dissociation,
                has_qrs=kind != "dropped",
                premature=premature,
                kind=kind,
            )
        )
    return plans, n_beats


def synthesize(spec: SyntheticSpec) -> SynthesisResult:
    """Generate a record plus exact per-lead ground-truth segments."""
    fs = spec.sampling_rate
    n = round(spec.duration_s * fs)
    plans, n_beats = _plan_beats(spec)

    pr_n = _ms_to_n(spec.pr_ms, fs)
    p_n = _ms_to_n(spec.p_dur_ms, fs)
    t_n = _ms_to_n(spec.t_dur_ms, fs)
    qt_n = _ms_to_n(spec.qt_ms, fs)

    # (class, onset, n_samples, beat_index, plan)
    events: list[tuple[WaveClass, int, int, int, _BeatPlan | None]] = []
    for plan in plans:
        if plan.has_p:
            events.append((WaveClass.P, plan.qrs_onset_idx - pr_n, p_n, plan.index, plan))
        if plan.has_qrs:
            events.append((WaveClass.QRS, plan.qrs_onset_idx, plan.qrs_n, plan.index, plan))
            t_off = plan.qrs_onset_idx + qt_n - 1
            events.append((WaveClass.T, t_off - t_n + 1, t_n, plan.index, plan))

    if spec.av_dissociation:
        events.extend(_dissociated_p_events(spec, plans, fs, n, p_n))

    for cls, onset, width, _, _ in events:
        if onset < 0 or onset + width > n:
            raise SpecError(f"{cls.value} wave at sample {onset} falls outside the strip")
    _check_no_overlap(events)

    signal = np.zeros((len(LEADS), n), dtype=np.float64)
    segments: list[WaveSegment] = []
    notch_frac = spec.notch_depth / spec.r_amp if spec.r_amp else 0.0

    for li, lead in enumerate(LEADS):
        amps = _lead_amplitudes(spec, lead)
        for cls, onset, width, beat_idx, plan in sorted(events, key=lambda e: e[1]):
            sl = slice(onset, onset + width)
            if cls is WaveClass.P:
                signal[li, sl] += _raised_cosine(width, amps["p_amp"])
                peak = onset + (width - 1) // 2
            elif cls is WaveClass.T:
                signal[li, sl] += _raised_cosine(width, amps["t_amp"])
                peak = onset + (width - 1) // 2
            else:
                shape = _qrs_shape(width, amps, notch_frac)
                signal[li, sl] += shape
                peak = onset + (int(np.argmax(np.abs(shape))) if np.abs(shape).max() > 1e-9 else (width - 1) // 2)
                if plan is not None and plan.has_qrs:
                    _paint_st(signal[li], onset + width - 1, onset + qt_n - t_n, amps["st_shift_mv"])
            segments.append(WaveSegment(cls, lead, onset, onset + width - 1, peak))

    if spec.noise_mv > 0:
        rng = np.random.default_rng(spec.seed)
        signal += rng.normal(0.0, spec.noise_mv, size=signal.shape)

    record = EcgRecord(id=spec.record_id, sampling_rate=fs, leads=LEADS, samples=signal.astype(np.float32))
    segments.sort(key=lambda s: (LEADS.index(s.lead), s.onset, s.wave_class.value))

    rr_ms = 60000.0 / spec.heart_rate
    expected = {
        "record_id": spec.record_id,
        "n_beats": n_beats,
        "n_qrs": sum(1 for p in plans if p.has_qrs),
        "n_p": sum(1 for e in events if e[0] is WaveClass.P),
        "pr_ms": spec.pr_ms,
        "qrs_ms": spec.qrs_ms,
        "qt_ms": spec.qt_ms,
        "rr_ms": rr_ms,
        "heart_rate_bpm": spec.heart_rate,
        "axis_deg": spec.axis_deg,
        "st_shift_mv": spec.st_shift_mv,
        "dropped_beats": list(spec.dropped_qrs_schedule),
        "ectopic_beats": [list(e) for e in spec.ectopic_schedule],
        "av_dissociation": spec.av_dissociation,
    }
    return SynthesisResult(record=record, segments=segments, expected=expected)


def _qrs_shape(width: int, amps: dict[str, float], notch_frac: float) -> np.ndarray:
    present = [c for c in ("q", "r", "s", "r_prime") if abs(amps[f"{c}_amp"]) > 1e-9]
    if not present:
        return np.zeros(width)
    widths = _qrs_widths(width, present)
    shape = np.zeros(width)
    cursor = 0
    for comp in present:
        m = widths[comp]
        amp = amps[f"{comp}_amp"]
        if comp == "r" and notch_frac > 0 and m >= 5:
            lobe = _notched_lobe(m, amp, notch_frac * abs(amp))
        else:
            lobe = _triangle(m, amp)
        shape[cursor:cursor + m] = lobe
        cursor += m
    return shape


def _paint_st(x: np.ndarray, qrs_offset: int, t_onset: int, st: float) -> None:
    if st == 0.0:
        return
    gap = t_onset - qrs_offset - 1
    if gap <= 0:
        return
    ramp_n = min(4, gap // 3)
    plateau_end = t_onset - 1 - ramp_n
    x[qrs_offset + 1:plateau_end + 1] = st
    for j in range(1, ramp_n + 1):
        x[plateau_end + j] = st * (1.0 - j / (ramp_n + 1.0))


def _dissociated_p_events(
    spec: SyntheticSpec, plans: list[_BeatPlan], fs: int, n: int, p_n: int
) -> list[tuple[WaveClass, int, int, int, None]]:
    """Independent atrial train; P waves colliding with QRS/T spans are dropped."""
    pp_ms = 60000.0 / float(spec.atrial_rate_bpm)
    qt_n = _ms_to_n(spec.qt_ms, fs)
    t_n = _ms_to_n(spec.t_dur_ms, fs)
    busy: list[tuple[int, int]] = []
    for plan in plans:
        if plan.has_qrs:
            busy.append((plan.qrs_onset_idx, plan.qrs_onset_idx + plan.qrs_n - 1))
            t_off = plan.qrs_onset_idx + qt_n - 1
            busy.append((t_off - t_n + 1, t_off))
    events = []
    onset_ms = 40.0
    j = 0
    while True:
        onset = round((onset_ms + j * pp_ms) * fs / 1000.0)
        if onset + p_n > n - 2:
            break
        span = (onset, onset + p_n - 1)
        if not any(a <= span[1] and span[0] <= b for a, b in busy):
            events.append((WaveClass.P, onset, p_n, -1, None))
        j += 1
    return events


def _check_no_overlap(events: list[tuple]) -> None:
    spans = sorted((onset, onset + width - 1, cls) for cls, onset, width, _, _ in events)
    for (a0, a1, ca), (b0, b1, cb) in zip(spans, spans[1:]):
        if b0 <= a1:
            raise SpecError(f"{ca.value} and {cb.value} waves overlap at samples {b0}..{a1}")


def ideal_probability_map(record: EcgRecord, segments: list[WaveSegment]) -> DelineationMap:
    """Probability map with 1.0 on the true class of every annotated sample."""
    probs = np.zeros((len(LEADS), record.n_samples, 4), dtype=np.float32)
    probs[:, :, BACKGROUND_INDEX] = 1.0
    for seg in segments:
        li = LEADS.index(seg.lead)
        sl = slice(seg.onset, seg.offset + 1)
        probs[li, sl, :] = 0.0
        probs[li, sl, seg.wave_class.map_index] = 1.0
    return DelineationMap(probs=probs)
