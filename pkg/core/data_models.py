from datetime import datetime
from fractions import Fraction
from typing import Any, Callable, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError

from core.bisim_service import BisimReport, Partition
from core.config import DEFAULT_DEPTH, FUEL, PROBE_SIZE, SEED
from core.gitrees import TAG_SYMBOLS, Branch, FiniteTree
from core.gsos_service import Trace
from core.kernel import Term, WorkbenchError
from core.logger import get_logger
from core.stage_service import StageElement

logger = get_logger(__name__)

TREE_SCHEMA = "gsos-tree/1"


class MalformedTree(WorkbenchError):
    """Custom exception for tree documents that do not follow the gsos-tree/1 schema."""
    pass


# --- Pydantic Models ---

class BranchModel(BaseModel):
    tree: "TreeModel"
    label: Optional[str] = None
    weight: Optional[str] = None  # reduced fraction, e.g. "1/2"


class TreeModel(BaseModel):
    tag: Literal["terminal", "reduct", "function", "value"]
    effect: Optional[Literal["distribution", "powerset"]] = None
    branches: Optional[List[BranchModel]] = None
    substitutions: Optional[List[BranchModel]] = None
    label: Optional[str] = None


BranchModel.model_rebuild()


class TraceBranchModel(BaseModel):
    term: str
    weight: Optional[str] = None


class TraceEntryModel(BaseModel):
    term: str
    kind: str
    branches: List[TraceBranchModel] = Field(default_factory=list)
    chosen: Optional[int] = None


class TraceModel(BaseModel):
    language: str
    entries: List[TraceEntryModel]
    diverged: bool


class DenotationModel(BaseModel):
    language: str
    term: str
    sort: str
    depth: int
    tree: TreeModel
    unravelling: Optional[str] = None


class BisimModel(BaseModel):
    language: str
    left: str
    right: str
    depth: int
    verdict: Literal["related", "distinguished"]
    probes: List[str]
    witness: Optional[str] = None
    witness_path: Optional[List[str]] = None


class PartitionModel(BaseModel):
    language: str
    blocks: List[List[str]]
    rounds: int
    closure_size: int


class StageModel(BaseModel):
    language: str
    stage: int
    count: int
    elements: List[str]


class RulesModel(BaseModel):
    language: str
    law: str
    flat: bool
    violations: List[str] = Field(default_factory=list)


class CheckRecord(BaseModel):
    suite: str
    language: str
    seed: int
    params: Dict[str, Any] = Field(default_factory=dict)
    mutation: Optional[str] = None
    verdict: Literal["pass", "fail", "skipped"]
    checked: int = 0
    violations: int = 0
    witness: Optional[str] = None
    details: Dict[str, Any] = Field(default_factory=dict)


class SuiteRun(BaseModel):
    run_id: str
    suite: str
    languages: List[str]
    status: Literal["queued", "running", "done", "failed"] = "queued"
    records: List[CheckRecord] = Field(default_factory=list)
    error: Optional[str] = None
    created_at: datetime
    finished_at: Optional[datetime] = None


# --- Request Models ---

class TraceRequest(BaseModel):
    language: str
    term: str
    fuel: int = Field(FUEL, ge=0)
    stage: Optional[int] = Field(None, ge=0)
    branch: Literal["first", "sample"] = "first"
    seed: int = SEED


class DenoteRequest(BaseModel):
    language: str
    term: str
    depth: int = Field(DEFAULT_DEPTH, ge=0)
    probe_size: int = Field(PROBE_SIZE, ge=1)


class BisimRequest(BaseModel):
    language: str
    left: str
    right: str
    depth: int = Field(DEFAULT_DEPTH, ge=0)
    probe_size: int = Field(PROBE_SIZE, ge=1)


class SuiteRequest(BaseModel):
    languages: Optional[List[str]] = None
    seed: int = SEED
    mutation: Optional[str] = None
    params: Dict[str, int] = Field(default_factory=dict)


# --- Conversion Functions ---

def _weight_text(weight: Optional[Fraction]) -> Optional[str]:
    return None if weight is None else str(weight)


def convert_tree_to_model(tree: FiniteTree) -> TreeModel:
    def branches(items):
        if items is None:
            return None
        return [
            BranchModel(tree=convert_tree_to_model(b.tree), label=b.label, weight=_weight_text(b.weight))
            for b in items
        ]

    return TreeModel(
        tag=tree.tag,
        effect=tree.effect,
        branches=branches(tree.branches),
        substitutions=branches(tree.substitutions),
        label=tree.label,
    )


def convert_model_to_tree(model: TreeModel) -> FiniteTree:
    def branches(items):
        if items is None:
            return None
        converted = []
        for b in items:
            try:
                weight = None if b.weight is None else Fraction(b.weight)
            except (ValueError, ZeroDivisionError) as e:
                raise MalformedTree(f"Bad branch weight {b.weight!r}: {e}")
            converted.append(Branch(convert_model_to_tree(b.tree), label=b.label, weight=weight))
        return tuple(converted)

    return FiniteTree(
        model.tag,
        effect=model.effect,
        branches=branches(model.branches),
        substitutions=branches(model.substitutions),
        label=model.label,
    )


def to_json(tree: FiniteTree) -> str:
    """Compact gsos-tree/1 text; absent fields are omitted, so a terminal leaf is {"tag":"terminal"}."""
    return convert_tree_to_model(tree).model_dump_json(exclude_none=True)


def from_json(text: str) -> FiniteTree:
    """
    Raises:
        MalformedTree: if the text is not a gsos-tree/1 document
    """
    try:
        model = TreeModel.model_validate_json(text)
    except ValidationError as e:
        raise MalformedTree(f"Not a {TREE_SCHEMA} tree: {e.error_count()} validation error(s)")
    return convert_model_to_tree(model)


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(tree: FiniteTree, name: str = "denotation") -> str:
    """
    Graphviz rendering: reduct edges unlabelled (weighted edges carry their
    weight), function edges labelled by probe index, terminals as double
    circles, depth-cut nodes dashed.
    """
    lines = [f"digraph {name} {{", '  node [fontname="monospace"];']
    counter = [0]

    def visit(t: FiniteTree) -> str:
        node_id = f"n{counter[0]}"
        counter[0] += 1
        if t.tag == "terminal":
            attrs = 'shape=doublecircle, label="✓"'
        elif t.tag == "value":
            attrs = f'shape=box, label="{_dot_escape(t.label or "")}"'
        else:
            symbol = TAG_SYMBOLS[t.tag] + ("" if t.effect is None else f" {t.effect[0]}")
            attrs = f'shape=circle, label="{symbol}"'
            if t.branches is None:
                attrs += ", style=dashed"
        lines.append(f"  {node_id} [{attrs}];")
        for index, branch in enumerate(t.branches or ()):
            child = visit(branch.tree)
            if t.tag == "function":
                lines.append(f'  {node_id} -> {child} [label="{index}"];')
            elif branch.weight is not None:
                lines.append(f'  {node_id} -> {child} [label="{branch.weight}"];')
            else:
                lines.append(f"  {node_id} -> {child};")
        for index, branch in enumerate(t.substitutions or ()):
            child = visit(branch.tree)
            lines.append(f'  {node_id} -> {child} [label="σ{index}", style=dotted];')
        return node_id

    visit(tree)
    lines.append("}")
    return "\n".join(lines) + "\n"


def convert_trace_to_model(trace: Trace, language: str, show: Callable[[Term], str]) -> TraceModel:
    entries = [
        TraceEntryModel(
            term=show(entry.term),
            kind=entry.kind,
            branches=[TraceBranchModel(term=show(t), weight=_weight_text(w)) for t, w in entry.branches],
            chosen=entry.chosen,
        )
        for entry in trace.entries
    ]
    return TraceModel(language=language, entries=entries, diverged=trace.diverged)


def convert_bisim_to_model(report: BisimReport, language: str, left: str, right: str) -> BisimModel:
    witness = report.witness
    return BisimModel(
        language=language,
        left=left,
        right=right,
        depth=report.depth,
        verdict=report.verdict,
        probes=list(report.probe_labels),
        witness=None if witness is None else witness.describe(),
        witness_path=None if witness is None else list(witness.path),
    )


def convert_partition_to_model(partition: Partition, language: str, show: Callable[[Term], str]) -> PartitionModel:
    return PartitionModel(
        language=language,
        blocks=[[show(t) for t in block] for block in partition.blocks],
        rounds=partition.rounds,
        closure_size=partition.closure_size,
    )


def convert_stage_to_model(elements: List[StageElement], language: str, stage: int) -> StageModel:
    return StageModel(language=language, stage=stage, count=len(elements), elements=[e.key for e in elements])
