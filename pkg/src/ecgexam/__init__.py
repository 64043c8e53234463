"""Rule-based 12-lead ECG analysis and multi-turn reading exams for chat models."""

from .records import EcgRecord, WaveClass, WaveSegment, read_record, write_record
from .synth import SyntheticSpec, SynthesisResult, ideal_probability_map, synthesize

__version__ = "0.1.0"

__all__ = [
    "EcgRecord",
    "WaveClass",
    "WaveSegment",
    "read_record",
    "write_record",
    "SyntheticSpec",
    "SynthesisResult",
    "synthesize",
    "ideal_probability_map",
    "__version__",
]
