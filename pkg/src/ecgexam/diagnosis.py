"""Hierarchical decision-diagram engine for the 17 core diagnoses.

Each diagram is a rooted DAG of decision nodes.  A node references one
finding and branches on its presence; leaves are POSITIVE or NEGATIVE.
Walking a diagram over an evaluated finding set yields the decision, the
ordered reasoning path, and the traversed evidence chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import CycleError, DanglingFindingError, MissingFindingError, SchemaError
from .findings import CriterionSpec, Finding

POSITIVE = "POSITIVE"
NEGATIVE = "NEGATIVE"
LEAVES = (POSITIVE, NEGATIVE)

DIAGNOSIS_IDS = (
    "1AVB", "2AVB", "3AVB",
    "CLBBB", "CRBBB", "LAFB", "LPFB",
    "LVH", "RVH",
    "PAC", "PVC",
    "AMI", "IMI", "LMI",
    "ISCAN", "ISCIN", "ISCLA",
)


@dataclass(frozen=True)
class DiagramNode:
    node_id: str
    finding_id: str
    yes: str  # node id or leaf
    no: str


@dataclass(frozen=True)
class LogicDiagram:
    diagnosis_id: str
    display_name: str
    group: str
    root: str
    nodes: dict[str, DiagramNode]

    def node(self, node_id: str) -> DiagramNode:
        return self.nodes[node_id]


@dataclass(frozen=True)
class ReasoningPath:
    diagnosis_id: str
    steps: tuple[tuple[str, str], ...]  # (finding_id, "yes"|"no")
    leaf: str

    @property
    def path_id(self) -> str:
        outcomes = "".join("Y" if outcome == "yes" else "N" for _, outcome in self.steps)
        sign = "+" if self.leaf == POSITIVE else "-"
        return f"{self.diagnosis_id}:{sign}{outcomes}"

    def to_dict(self) -> dict:
        return {
            "diagnosis_id": self.diagnosis_id,
            "steps": [list(s) for s in self.steps],
            "leaf": self.leaf,
            "path_id": self.path_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReasoningPath":
        return cls(
            diagnosis_id=d["diagnosis_id"],
            steps=tuple((f, o) for f, o in d["steps"]),
            leaf=d["leaf"],
        )


@dataclass(frozen=True)
class DiagnosisResult:
    diagnosis_id: str
    decision: str  # POSITIVE | NEGATIVE
    path: ReasoningPath
    evidence: tuple[Finding, ...]

    @property
    def positive(self) -> bool:
        return self.decision == POSITIVE

    def to_dict(self) -> dict:
        return {
            "diagnosis_id": self.diagnosis_id,
            "decision": self.decision,
            "path": self.path.to_dict(),
            "evidence": [f.to_dict() for f in self.evidence],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosisResult":
        return cls(
            diagnosis_id=d["diagnosis_id"],
            decision=d["decision"],
            path=ReasoningPath.from_dict(d["path"]),
            evidence=tuple(Finding.from_dict(f) for f in d["evidence"]),
        )


# ---------------------------------------------------------------------------
# Loading and validation
# ---------------------------------------------------------------------------

def default_diagrams_path() -> Path:
    return Path(str(resources.files("ecgexam").joinpath("data/diagrams.json")))


def load_diagrams(
    path: str | Path | None = None,
    catalog: list[CriterionSpec] | None = None,
) -> dict[str, LogicDiagram]:
    """Load diagrams, checking acyclicity and finding references."""
    path = Path(path) if path is not None else default_diagrams_path()
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise IOError(f"diagram file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", "/")
    return parse_diagrams(data, catalog)


def parse_diagrams(data, catalog: list[CriterionSpec] | None = None) -> dict[str, LogicDiagram]:
    if not isinstance(data, dict) or "diagrams" not in data:
        raise SchemaError("diagram file must be an object with a 'diagrams' array", "/")
    known = {c.finding_id for c in catalog} if catalog is not None else None
    out: dict[str, LogicDiagram] = {}
    for i, entry in enumerate(data["diagrams"]):
        loc = f"/diagrams/{i}"
        for key in ("diagnosis_id", "display_name", "group", "root", "nodes"):
            if key not in entry:
                raise SchemaError(f"missing required key {key!r}", loc)
        nodes: dict[str, DiagramNode] = {}
        for node_id, spec in entry["nodes"].items():
            for key in ("finding_id", "yes", "no"):
                if key not in spec:
                    raise SchemaError(f"node {node_id!r} missing {key!r}", f"{loc}/nodes/{node_id}")
            nodes[node_id] = DiagramNode(
                node_id=node_id, finding_id=spec["finding_id"], yes=spec["yes"], no=spec["no"]
            )
        diagram = LogicDiagram(
            diagnosis_id=entry["diagnosis_id"],
            display_name=entry["display_name"],
            group=entry["group"],
            root=entry["root"],
            nodes=nodes,
        )
        _validate_diagram(diagram, known)
        if diagram.diagnosis_id in out:
            raise SchemaError(f"duplicate diagnosis_id {diagram.diagnosis_id!r}", loc)
        out[diagram.diagnosis_id] = diagram
    return out


def _validate_diagram(diagram: LogicDiagram, known_findings: set[str] | None) -> None:
    if diagram.root not in diagram.nodes:
        raise SchemaError(f"root {diagram.root!r} is not a node", f"/{diagram.diagnosis_id}")
    for node in diagram.nodes.values():
        for target in (node.yes, node.no):
            if target not in LEAVES and target not in diagram.nodes:
                raise SchemaError(
                    f"node {node.node_id!r} points to unknown target {target!r}",
                    f"/{diagram.diagnosis_id}",
                )
        if known_findings is not None and node.finding_id not in known_findings:
            raise DanglingFindingError(
                f"{diagram.diagnosis_id}: node {node.node_id!r} references unknown finding "
                f"{node.finding_id!r}"
            )
    # Acyclicity by DFS colouring.
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {node_id: WHITE for node_id in diagram.nodes}

    def visit(node_id: str) -> None:
        if node_id in LEAVES:
            return
        if colour[node_id] == GREY:
            raise CycleError(f"{diagram.diagnosis_id}: cycle through node {node_id!r}")
        if colour[node_id] == BLACK:
            return
        colour[node_id] = GREY
        node = diagram.nodes[node_id]
        visit(node.yes)
        visit(node.no)
        colour[node_id] = BLACK

    visit(diagram.root)


# ---------------------------------------------------------------------------
# Evaluation and path enumeration
# ---------------------------------------------------------------------------

def run_diagram(diagram: LogicDiagram, findings: list[Finding]) -> DiagnosisResult:
    """Walk from the root taking the yes edge when the finding is present."""
    by_id = {f.finding_id: f for f in findings}
    steps: list[tuple[str, str]] = []
    evidence: list[Finding] = []
    current = diagram.root
    while current not in LEAVES:
        node = diagram.node(current)
        finding = by_id.get(node.finding_id)
        if finding is None:
            raise MissingFindingError(
                f"{diagram.diagnosis_id}: no evaluation for finding {node.finding_id!r}"
            )
        outcome = "yes" if finding.present else "no"
        steps.append((node.finding_id, outcome))
        evidence.append(finding)
        current = node.yes if finding.present else node.no
    path = ReasoningPath(diagnosis_id=diagram.diagnosis_id, steps=tuple(steps), leaf=current)
    return DiagnosisResult(
        diagnosis_id=diagram.diagnosis_id,
        decision=current,
        path=path,
        evidence=tuple(evidence),
    )


def enumerate_paths(diagram: LogicDiagram) -> list[ReasoningPath]:
    """Exhaustive depth-first enumeration, yes-edge before no-edge."""
    out: list[ReasoningPath] = []

    def walk(node_id: str, steps: tuple[tuple[str, str], ...]) -> None:
        if node_id in LEAVES:
            out.append(ReasoningPath(diagram.diagnosis_id, steps, node_id))
            return
        node = diagram.node(node_id)
        walk(node.yes, steps + ((node.finding_id, "yes"),))
        walk(node.no, steps + ((node.finding_id, "no"),))

    walk(diagram.root, ())
    return out


def paths_by_sign(diagram: LogicDiagram) -> tuple[list[ReasoningPath], list[ReasoningPath]]:
    paths = enumerate_paths(diagram)
    return (
        [p for p in paths if p.leaf == POSITIVE],
        [p for p in paths if p.leaf == NEGATIVE],
    )


def replay_path(diagram: LogicDiagram, outcomes: dict[str, bool]) -> str:
    """Re-walk a diagram from explicit finding outcomes; returns the leaf."""
    current = diagram.root
    while current not in LEAVES:
        node = diagram.node(current)
        if node.finding_id not in outcomes:
            raise MissingFindingError(
                f"{diagram.diagnosis_id}: replay lacks outcome for {node.finding_id!r}"
            )
        current = node.yes if outcomes[node.finding_id] else node.no
    return current


# ---------------------------------------------------------------------------
# Compound diagnoses and DOT export
# ---------------------------------------------------------------------------

def default_compounds_path() -> Path:
    return Path(str(resources.files("ecgexam").joinpath("data/compounds.json")))


def load_compounds(path: str | Path | None = None) -> list[dict]:
    path = Path(path) if path is not None else default_compounds_path()
    data = json.loads(path.read_text(encoding="utf-8"))
    return data["compounds"]


def derive_compounds(results: dict[str, DiagnosisResult], compounds: list[dict]) -> list[dict]:
    """Conjunction layer over diagram decisions (e.g. two-territory infarcts)."""
    out = []
    for spec in compounds:
        components = spec["all_of"]
        positive = all(
            d in results and results[d].decision == POSITIVE for d in components
        )
        out.append(
            {
                "compound_id": spec["compound_id"],
                "display_name": spec["display_name"],
                "components": list(components),
                "positive": positive,
            }
        )
    return out


def to_dot(diagram: LogicDiagram, catalog: list[CriterionSpec] | None = None) -> str:
    """Graphviz export for visual inspection of an authored diagram."""
    names = {c.finding_id: c.display_name for c in catalog} if catalog else {}
    lines = [f'digraph "{diagram.diagnosis_id}" {{', "  rankdir=TB;"]
    for node in diagram.nodes.values():
        label = names.get(node.finding_id, node.finding_id)
        lines.append(f'  "{node.node_id}" [shape=box, label="{label}"];')
    lines.append('  "POSITIVE" [shape=ellipse, style=filled, fillcolor=lightcoral];')
    lines.append('  "NEGATIVE" [shape=ellipse, style=filled, fillcolor=lightgray];')
    for node in diagram.nodes.values():
        lines.append(f'  "{node.node_id}" -> "{node.yes}" [label="yes"];')
        lines.append(f'  "{node.node_id}" -> "{node.no}" [label="no"];')
    lines.append("}")
    return "\n".join(lines)
