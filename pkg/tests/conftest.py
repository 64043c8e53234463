import pytest

from ecgexam.diagnosis import load_diagrams
from ecgexam.findings import load_catalog
from ecgexam.pipeline import analyze_record, delineate_from_map
from ecgexam.synth import SyntheticSpec, ideal_probability_map, synthesize


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def diagrams(catalog):
    return load_diagrams(catalog=catalog)


def analyze_spec(spec: SyntheticSpec, catalog, diagrams):
    """Full pipeline: synth -> ideal map -> decode/post-process -> analysis."""
    result = synthesize(spec)
    dmap = ideal_probability_map(result.record, result.segments)
    dset = delineate_from_map(result.record, dmap)
    return result, analyze_record(result.record, dset, catalog, diagrams)


@pytest.fixture(scope="session")
def clbbb_analysis(catalog, diagrams):
    spec = SyntheticSpec(
        qrs_ms=140.0, qt_ms=480.0, r_amp=1.2, notch_depth=0.18, record_id="clbbb-fixture"
    )
    return analyze_spec(spec, catalog, diagrams)


@pytest.fixture(scope="session")
def normal_analysis(catalog, diagrams):
    return analyze_spec(SyntheticSpec(record_id="normal-fixture"), catalog, diagrams)
