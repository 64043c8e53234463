"""Diagram loading, walking, path enumeration, and compound derivation."""

import pytest

from ecgexam.diagnosis import (
    DIAGNOSIS_IDS,
    NEGATIVE,
    POSITIVE,
    derive_compounds,
    enumerate_paths,
    load_compounds,
    parse_diagrams,
    paths_by_sign,
    replay_path,
    run_diagram,
    to_dot,
)
from ecgexam.errors import CycleError, DanglingFindingError, MissingFindingError
from ecgexam.findings import Finding, Grounding
from ecgexam.synth import SyntheticSpec
from tests.conftest import analyze_spec


def finding(fid, present):
    return Finding(finding_id=fid, present=present, category="x", display_name=fid,
                   grounding=Grounding())


def mini_diagram(nodes, root="n1", dx="TEST"):
    return parse_diagrams({"diagrams": [{
        "diagnosis_id": dx, "display_name": dx, "group": "g", "root": root, "nodes": nodes,
    }]})[dx]


class TestLoading:
    def test_default_set_has_all_17(self, diagrams):
        assert set(diagrams) == set(DIAGNOSIS_IDS)

    def test_every_diagram_has_positive_and_negative_paths(self, diagrams):
        for dx, diagram in diagrams.items():
            pos, neg = paths_by_sign(diagram)
            assert pos, dx
            assert neg, dx

    def test_cycle_rejected(self):
        with pytest.raises(CycleError):
            mini_diagram({
                "n1": {"finding_id": "prolonged_pr", "yes": "n2", "no": "NEGATIVE"},
                "n2": {"finding_id": "normal_pr", "yes": "n1", "no": "NEGATIVE"},
            })

    def test_dangling_finding_rejected(self, catalog):
        with pytest.raises(DanglingFindingError):
            parse_diagrams(
                {"diagrams": [{
                    "diagnosis_id": "X", "display_name": "X", "group": "g", "root": "n1",
                    "nodes": {"n1": {"finding_id": "no_such_finding", "yes": "POSITIVE",
                                      "no": "NEGATIVE"}},
                }]},
                catalog=catalog,
            )

    def test_default_set_references_known_findings(self, catalog, diagrams):
        ids = {c.finding_id for c in catalog}
        for diagram in diagrams.values():
            for node in diagram.nodes.values():
                assert node.finding_id in ids


class TestRunDiagram:
    def test_1avb_positive(self, catalog, diagrams):
        _, analysis = analyze_spec(SyntheticSpec(pr_ms=240.0), catalog, diagrams)
        result = analysis.results["1AVB"]
        assert result.decision == POSITIVE
        assert result.path.steps == (("one_to_one_conduction", "yes"), ("prolonged_pr", "yes"))

    def test_all_absent_reaches_negative(self, diagrams):
        diagram = diagrams["CLBBB"]
        findings = [finding(n.finding_id, False) for n in diagram.nodes.values()]
        result = run_diagram(diagram, findings)
        assert result.decision == NEGATIVE
        assert result.path.steps == (("prolonged_qrs", "no"),)

    def test_clbbb_all_yes(self, diagrams):
        diagram = diagrams["CLBBB"]
        findings = [finding(n.finding_id, True) for n in diagram.nodes.values()]
        result = run_diagram(diagram, findings)
        assert result.decision == POSITIVE
        assert [o for _, o in result.path.steps] == ["yes"] * 4

    def test_missing_finding_raises(self, diagrams):
        with pytest.raises(MissingFindingError, match="prolonged_qrs"):
            run_diagram(diagrams["CLBBB"], [])

    def test_evidence_matches_path(self, catalog, diagrams):
        _, analysis = analyze_spec(SyntheticSpec(pr_ms=240.0), catalog, diagrams)
        result = analysis.results["1AVB"]
        assert len(result.evidence) == len(result.path.steps)
        for f, (fid, outcome) in zip(result.evidence, result.path.steps):
            assert f.finding_id == fid
            assert f.present == (outcome == "yes")


class TestEnumeratePaths:
    def test_single_decision_two_paths(self):
        diagram = mini_diagram({
            "n1": {"finding_id": "prolonged_pr", "yes": "POSITIVE", "no": "NEGATIVE"},
        })
        paths = enumerate_paths(diagram)
        assert len(paths) == 2
        assert {p.leaf for p in paths} == {POSITIVE, NEGATIVE}

    def test_linear_four_chain(self, diagrams):
        pos, neg = paths_by_sign(diagrams["CLBBB"])
        assert len(pos) == 1
        assert len(neg) == 4

    def test_run_path_is_member_of_enumeration(self, catalog, diagrams):
        for spec in (SyntheticSpec(), SyntheticSpec(pr_ms=240.0),
                     SyntheticSpec(qrs_ms=140.0, qt_ms=480.0, r_amp=1.2, notch_depth=0.18)):
            _, analysis = analyze_spec(spec, catalog, diagrams)
            for dx, result in analysis.results.items():
                all_ids = {p.path_id for p in enumerate_paths(diagrams[dx])}
                assert result.path.path_id in all_ids

    def test_replay_reproduces_leaf(self, diagrams):
        for diagram in diagrams.values():
            for path in enumerate_paths(diagram):
                outcomes = {fid: outcome == "yes" for fid, outcome in path.steps}
                assert replay_path(diagram, outcomes) == path.leaf

    def test_flip_changes_traversal_locally(self, diagrams):
        diagram = diagrams["CLBBB"]
        findings = {n.finding_id: True for n in diagram.nodes.values()}
        base = run_diagram(diagram, [finding(f, v) for f, v in findings.items()])
        flipped = dict(findings, monophasic_r_lateral=False)
        result = run_diagram(diagram, [finding(f, v) for f, v in flipped.items()])
        # Shared prefix up to the flipped node, divergence exactly there.
        assert base.path.steps[:2] == result.path.steps[:2]
        assert result.path.steps[2] == ("monophasic_r_lateral", "no")
        assert result.decision == NEGATIVE


class TestCompoundsAndExport:
    def test_inferolateral_requires_both(self, diagrams):
        compounds = load_compounds()
        pos = {dx: run_diagram(diagrams[dx], [finding(n.finding_id, True)
                                              for n in diagrams[dx].nodes.values()])
               for dx in ("IMI", "LMI")}
        neg_lmi = {
            "IMI": pos["IMI"],
            "LMI": run_diagram(diagrams["LMI"], [finding(n.finding_id, False)
                                                  for n in diagrams["LMI"].nodes.values()]),
        }
        both = derive_compounds(pos, compounds)
        one = derive_compounds(neg_lmi, compounds)
        ilmi_both = next(c for c in both if c["compound_id"] == "ILMI")
        ilmi_one = next(c for c in one if c["compound_id"] == "ILMI")
        assert ilmi_both["positive"] is True
        assert ilmi_one["positive"] is False

    def test_dot_export_mentions_every_node(self, catalog, diagrams):
        dot = to_dot(diagrams["CLBBB"], catalog)
        assert dot.startswith("digraph")
        for node_id in diagrams["CLBBB"].nodes:
            assert node_id in dot
