"""End-to-end record analysis: delineation, measurement, findings, diagnoses.

This is the glue the CLI and the test oracles share.  Segments can come
from a probability map (decoded and post-processed) or from an annotation
file (turned into an ideal map first so the same decoding path runs).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import delineation as dl
from . import features as ft
from .benchgen import RecordContext
from .diagnosis import DiagnosisResult, LogicDiagram, load_compounds, derive_compounds, run_diagram
from .findings import CriterionSpec, Finding, evaluate_findings
from .records import DelineationMap, EcgRecord, WaveSegment
from .synth import ideal_probability_map


@dataclass(frozen=True)
class AnalysisResult:
    record_id: str
    delineation: dl.DelineationSet
    measurements: ft.RecordMeasurements
    findings: list[Finding]
    results: dict[str, DiagnosisResult]
    compounds: list[dict]

    def context(self, paths: dict | None = None) -> RecordContext:
        return RecordContext(
            record_id=self.record_id,
            duration_s=self.measurements.duration_s,
            sampling_rate=self.measurements.sampling_rate,
            qrs_onsets_s=list(self.measurements.qrs_onsets_s),
            paths=dict(paths or {}),
        )

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "delineation": self.delineation.to_dict(),
            "measurements": self.measurements.to_dict(),
            "findings": [f.to_dict() for f in self.findings],
            "diagnoses": {dx: r.to_dict() for dx, r in sorted(self.results.items())},
            "compounds": self.compounds,
            "case_support": {
                "duration_s": self.measurements.duration_s,
                "sampling_rate": self.measurements.sampling_rate,
                "qrs_onsets_s": self.measurements.qrs_onsets_s,
            },
        }


def delineate_from_map(record: EcgRecord, dmap: DelineationMap) -> dl.DelineationSet:
    """Decode plus the three post-processing stages plus consensus."""
    per_lead = dl.decode_probability_map(dmap, record)
    per_lead = dl.recover_p_waves(record, per_lead)
    per_lead = dl.enforce_t_constraints(per_lead)
    return dl.build_consensus(
        per_lead, record.sampling_rate,
        provenance=dl.PROVENANCE_MAP, record_id=record.id,
    )


def delineate_from_annotations(record: EcgRecord, segments: list[WaveSegment]) -> dl.DelineationSet:
    """Run annotations through the ideal-map path so decoding is exercised."""
    dmap = ideal_probability_map(record, segments)
    dset = delineate_from_map(record, dmap)
    return dl.DelineationSet(
        sampling_rate=dset.sampling_rate,
        per_lead=dset.per_lead,
        consensus=dset.consensus,
        provenance=dl.PROVENANCE_ANNOTATION,
        record_id=dset.record_id,
    )


def analyze_record(
    record: EcgRecord,
    delineation_set: dl.DelineationSet,
    catalog: list[CriterionSpec],
    diagrams: dict[str, LogicDiagram],
    compounds: list[dict] | None = None,
) -> AnalysisResult:
    grouping = ft.group_beats(delineation_set)
    measurements = ft.measure(record, grouping)
    findings = evaluate_findings(measurements, catalog)
    results = {dx: run_diagram(diagram, findings) for dx, diagram in sorted(diagrams.items())}
    if compounds is None:
        compounds = load_compounds()
    return AnalysisResult(
        record_id=record.id,
        delineation=delineation_set,
        measurements=measurements,
        findings=findings,
        results=results,
        compounds=derive_compounds(results, compounds),
    )
