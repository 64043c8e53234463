"""Core signal types and record/map/annotation file I/O.

A record is an immutable 12-lead strip in millivolts.  Two on-disk layouts
are supported and round-trip bit-exactly:

* ``csv`` - three header rows (``id``, ``sampling_rate``, ``lead,...``)
  followed by one row of 12 float values per sample (time-major).
* ``packed-binary`` - a single JSON header line followed by raw
  little-endian 32-bit floats in lead-major order.

Probability maps use the same header-plus-tensor layout with shape
``[lead, time, 4]`` and class order P, QRS, T, background.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError
from .leads import CONSENSUS_LEAD, LEADS

MAP_CLASSES: tuple[str, ...] = ("P", "QRS", "T", "BG")
BACKGROUND_INDEX = 3


class WaveClass(str, Enum):
    P = "P"
    QRS = "QRS"
    T = "T"

    @property
    def map_index(self) -> int:
        return MAP_CLASSES.index(self.value)


@dataclass(frozen=True)
class WaveSegment:
    """One delineated wave on one lead, sample indices inclusive on both ends."""

    wave_class: WaveClass
    lead: str
    onset: int
    offset: int
    peak: int

    def __post_init__(self):
        object.__setattr__(self, "wave_class", WaveClass(self.wave_class))
        object.__setattr__(self, "onset", int(self.onset))
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "peak", int(self.peak))
        if not (self.onset <= self.peak <= self.offset):
            raise ValueError(
                f"segment ordering violated: onset={self.onset} peak={self.peak} offset={self.offset}"
            )
        if self.lead != CONSENSUS_LEAD and self.lead not in LEADS:
            raise ValueError(f"unknown lead label: {self.lead!r}")

    def duration_samples(self) -> int:
        return self.offset - self.onset + 1

    def duration_ms(self, sampling_rate: int) -> float:
        return self.duration_samples() * 1000.0 / sampling_rate

    def to_dict(self) -> dict:
        return {
            "lead": self.lead,
            "class": self.wave_class.value,
            "onset": self.onset,
            "offset": self.offset,
            "peak": self.peak,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WaveSegment":
        return cls(WaveClass(d["class"]), d["lead"], d["onset"], d["offset"], d["peak"])


@dataclass(frozen=True, eq=False)
class EcgRecord:
    """A 12-lead sampled strip; ``samples`` is [lead, time] in millivolts."""

    id: str
    sampling_rate: int
    leads: tuple[str, ...]
    samples: np.ndarray

    def __post_init__(self):
        if self.sampling_rate <= 0 or int(self.sampling_rate) != self.sampling_rate:
            raise FormatError(f"sampling_rate must be a positive integer, got {self.sampling_rate}")
        object.__setattr__(self, "sampling_rate", int(self.sampling_rate))
        if tuple(self.leads) != LEADS:
            raise FormatError(
                f"leads must be the canonical 12-lead set in order, got {tuple(self.leads)}"
            )
        arr = np.asarray(self.samples, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] != len(LEADS):
            raise FormatError(f"samples must have shape (12, n), got {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "leads", LEADS)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sampling_rate

    def lead_signal(self, lead: str) -> np.ndarray:
        return self.samples[LEADS.index(lead)]


@dataclass(frozen=True, eq=False)
class DelineationMap:
    """Per-lead class probabilities, shape [lead, time, 4]; rows sum to one."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[0] != len(LEADS) or arr.shape[2] != len(MAP_CLASSES):
            raise FormatError(f"probability map must have shape (12, n, 4), got {arr.shape}")
        sums = arr.astype(np.float64).sum(axis=2)
        worst = float(np.abs(sums - 1.0).max()) if arr.size else 0.0
        if worst > 1e-6:
            raise FormatError(f"probability rows must sum to 1 within 1e-6 (worst deviation {worst:.2e})")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def n_samples(self) -> int:
        return self.probs.shape[1]

    def check_against(self, record: EcgRecord) -> None:
        if self.n_samples != record.n_samples:
            raise DimensionError(
                f"map has {self.n_samples} samples but record has {record.n_samples}"
            )


# ---------------------------------------------------------------------------
# Record I/O
# ---------------------------------------------------------------------------

def _format_f32(value: np.float32) -> str:
    # Shortest decimal string that round-trips the exact float32 bits.
    return np.format_float_positional(value, unique=True, trim="0")


def write_record(record: EcgRecord, path: str | Path, format: str = "csv") -> None:
    path = Path(path)
    if format == "csv":
        buf = io.StringIO()
        buf.write(f"id,{record.id}\n")
        buf.write(f"sampling_rate,{record.sampling_rate}\n")
        buf.write("lead," + ",".join(record.leads) + "\n")
        cols = record.samples.T  # [time, lead]
        for row in cols:
            buf.write(",".join(_format_f32(v) for v in row) + "\n")
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif format == "packed-binary":
        header = {
            "id": record.id,
            "sampling_rate": record.sampling_rate,
            "leads": list(record.leads),
            "n_samples": record.n_samples,
        }
        with path.open("wb") as fh:
            fh.write(json.dumps(header).encode("utf-8") + b"\n")
            fh.write(record.samples.astype("<f4").tobytes())
    else:
        raise ValueError(f"unknown record format: {format!r}")


def read_record(path: str | Path, format: str = "csv") -> EcgRecord:
    path = Path(path)
    if not path.exists():
        raise IOError(f"record file not found: {path}")
    if format == "csv":
        return _read_csv(path)
    if format == "packed-binary":
        return _read_binary(path)
    raise ValueError(f"unknown record format: {format!r}")


def _read_csv(path: Path) -> EcgRecord:
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 3:
        raise FormatError(f"{path}: expected id, sampling_rate and lead header rows")
    def header(idx: int, key: str) -> list[str]:
        parts = lines[idx].split(",")
        if parts[0] != key:
            raise FormatError(f"{path}: row {idx + 1} must start with '{key}', got {parts[0]!r}")
        if len(parts) < 2:
            raise FormatError(f"{path}: row {idx + 1} ('{key}') carries no value")
        return parts[1:]

    rec_id = header(0, "id")[0]
    rate_text = header(1, "sampling_rate")[0]
    try:
        rate = int(rate_text)
    except ValueError as exc:
        raise FormatError(f"{path}: sampling_rate is not an integer: {rate_text!r}") from exc
    lead_labels = header(2, "lead")
    if tuple(lead_labels) != LEADS:
        bad = [l for l in lead_labels if l not in LEADS] or list(lead_labels)
        raise FormatError(
            f"{path}: expected the canonical 12 leads, got {len(lead_labels)} columns "
            f"(offending labels: {bad[:3]})"
        )
    rows = []
    for lineno, line in enumerate(lines[3:], start=4):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(LEADS):
            raise FormatError(f"{path}: row {lineno} has {len(parts)} values, expected {len(LEADS)}")
        try:
            rows.append([np.float32(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"{path}: row {lineno} has a non-numeric value") from exc
    samples = np.asarray(rows, dtype=np.float32).T if rows else np.zeros((12, 0), np.float32)
    return EcgRecord(id=rec_id, sampling_rate=rate, leads=LEADS, samples=samples)


def _read_binary(path: Path) -> EcgRecord:
    with path.open("rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: invalid binary header") from exc
        for key in ("id", "sampling_rate", "leads", "n_samples"):
            if key not in header:
                raise FormatError(f"{path}: binary header missing {key!r}")
        if tuple(header["leads"]) != LEADS:
            raise FormatError(f"{path}: expected canonical leads, got {header['leads']}")
        n = int(header["n_samples"])
        raw = fh.read()
    expected = len(LEADS) * n * 4
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} payload bytes, found {len(raw)}")
    samples = np.frombuffer(raw, dtype="<f4").reshape(len(LEADS), n)
    return EcgRecord(id=header["id"], sampling_rate=int(header["sampling_rate"]), leads=LEADS, samples=samples)


# ---------------------------------------------------------------------------
# Probability-map and annotation I/O
# ---------------------------------------------------------------------------

def write_probability_map(dmap: DelineationMap, record_id: str, path: str | Path) -> None:
    header = {
        "record_id": record_id,
        "leads": list(LEADS),
        "n_samples": dmap.n_samples,
        "classes": list(MAP_CLASSES),
    }
    with Path(path).open("wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(dmap.probs.astype("<f4").tobytes())


def read_probability_map(path: str | Path) -> tuple[str, DelineationMap]:
    path = Path(path)
    if not path.exists():
        raise IOError(f"probability map not found: {path}")
    with path.open("rb") as fh:
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: invalid map header") from exc
        if tuple(header.get("classes", ())) != MAP_CLASSES:
            raise FormatError(f"{path}: class order must be {MAP_CLASSES}")
        if "n_samples" not in header or "record_id" not in header:
            raise FormatError(f"{path}: map header missing n_samples/record_id")
        n = int(header["n_samples"])
        raw = fh.read()
    expected = len(LEADS) * n * len(MAP_CLASSES) * 4
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} payload bytes, found {len(raw)}")
    probs = np.frombuffer(raw, dtype="<f4").reshape(len(LEADS), n, len(MAP_CLASSES))
    return header["record_id"], DelineationMap(probs=probs)


def write_annotations(segments: list[WaveSegment], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([s.to_dict() for s in segments], indent=0) + "\n", encoding="utf-8"
    )


def read_annotations(path: str | Path) -> list[WaveSegment]:
    path = Path(path)
    if not path.exists():
        raise IOError(f"annotation file not found: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("segments", [])
    try:
        return [WaveSegment.from_dict(d) for d in data]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed annotation entry: {exc}") from exc
