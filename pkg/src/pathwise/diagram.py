"""Typed flowchart graph model and strict diagram-JSON validation.

A diagram document is only admitted if it satisfies the schema exactly;
violations abort ingestion with :class:`~pathwise.errors.SchemaError`
rather than producing a partially repaired graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .errors import BackendUnknownError, MalformedJsonError, SchemaError

NODE_TYPES = frozenset(
    {
        "start_block",
        "end_block",
        "criteria_block",
        "action_block",
        "decision_diamond",
        "process_block",
        "annotation",
        "other",
    }
)

FONT_WEIGHTS = frozenset({"normal", "bold"})
TEXT_CASES = frozenset({"mixed", "upper", "lower"})

_TOP_KEYS = ("pathway_name", "source_document", "pages", "nodes", "edges")


@dataclass(frozen=True)
class VisualAttributes:
    background_color: str = "white"
    border_color: str = "black"
    font_weight: str = "normal"
    text_case: str = "mixed"


@dataclass(frozen=True)
class FlowNode:
    id: str
    node_type: str
    bbox: Tuple[float, float, float, float]  # center-x, center-y, w, h in [0,1]
    visual: VisualAttributes
    text: str


@dataclass(frozen=True)
class FlowEdge:
    source: str
    target: str
    label: Optional[str] = None


@dataclass(frozen=True)
class FlowchartDiagram:
    pathway_name: str
    source_document: str
    pages: int
    nodes: Tuple[FlowNode, ...]
    edges: Tuple[FlowEdge, ...]

    _by_id: Dict[str, FlowNode] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {n.id: n for n in self.nodes})

    def node(self, node_id: str) -> FlowNode:
        return self._by_id[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._by_id

    def to_dict(self) -> dict:
        return {
            "pathway_name": self.pathway_name,
            "source_document": self.source_document,
            "pages": self.pages,
            "nodes": [
                {
                    "id": n.id,
                    "node_type": n.node_type,
                    "bbox": {
                        "x": n.bbox[0],
                        "y": n.bbox[1],
                        "w": n.bbox[2],
                        "h": n.bbox[3],
                    },
                    "visual": {
                        "background_color": n.visual.background_color,
                        "border_color": n.visual.border_color,
                        "font_weight": n.visual.font_weight,
                        "text_case": n.visual.text_case,
                    },
                    "text": n.text,
                }
                for n in self.nodes
            ],
            "edges": [
                {"source": e.source, "target": e.target, "label": e.label}
                for e in self.edges
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def _want(obj: dict, key: str, types, path: str):
    if key not in obj:
        raise SchemaError("missing_field", f"{path}.{key}", f"missing field {key!r}")
    value = obj[key]
    if not isinstance(value, types):
        raise SchemaError(
            "invalid_value", f"{path}.{key}", f"field {key!r} has wrong type"
        )
    return value


def _parse_visual(raw, path: str) -> VisualAttributes:
    if raw is None:
        return VisualAttributes()
    if not isinstance(raw, dict):
        raise SchemaError("invalid_value", path, "visual must be an object")
    defaults = VisualAttributes()
    values = {}
    for key, fallback in (
        ("background_color", defaults.background_color),
        ("border_color", defaults.border_color),
        ("font_weight", defaults.font_weight),
        ("text_case", defaults.text_case),
    ):
        value = raw.get(key, fallback)
        if not isinstance(value, str):
            raise SchemaError("invalid_value", f"{path}.{key}", f"{key} must be a string")
        values[key] = value
    if values["font_weight"] not in FONT_WEIGHTS:
        raise SchemaError(
            "invalid_value", f"{path}.font_weight", "font_weight must be normal|bold"
        )
    if values["text_case"] not in TEXT_CASES:
        raise SchemaError(
            "invalid_value", f"{path}.text_case", "text_case must be mixed|upper|lower"
        )
    return VisualAttributes(**values)


def _parse_node(raw, idx: int) -> FlowNode:
    path = f"$.nodes[{idx}]"
    if not isinstance(raw, dict):
        raise SchemaError("invalid_value", path, "node must be an object")
    for key in raw:
        if key not in ("id", "node_type", "bbox", "text", "visual"):
            raise SchemaError("unknown_key", f"{path}.{key}", f"unknown node key {key!r}")
    node_id = _want(raw, "id", str, path)
    node_type = _want(raw, "node_type", str, path)
    if node_type not in NODE_TYPES:
        raise SchemaError(
            "unknown_node_type",
            f"{path}.node_type",
            f"unknown node_type {node_type!r}",
        )
    bbox_raw = _want(raw, "bbox", dict, path)
    coords = []
    for key in ("x", "y", "w", "h"):
        if key not in bbox_raw:
            raise SchemaError(
                "missing_field", f"{path}.bbox.{key}", f"bbox missing {key!r}"
            )
        value = bbox_raw[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(
                "invalid_value", f"{path}.bbox.{key}", "bbox values must be numbers"
            )
        if not 0.0 <= float(value) <= 1.0:
            raise SchemaError(
                "bbox_out_of_range",
                f"{path}.bbox.{key}",
                f"bbox.{key}={value} outside [0,1]",
            )
        coords.append(float(value))
    visual = _parse_visual(raw.get("visual"), f"{path}.visual")
    text = _want(raw, "text", str, path)
    if not text and node_type != "other":
        raise SchemaError(
            "invalid_value", f"{path}.text", "text may be empty only for node_type=other"
        )
    return FlowNode(
        id=node_id,
        node_type=node_type,
        bbox=(coords[0], coords[1], coords[2], coords[3]),
        visual=visual,
        text=text,
    )


def _parse_edge(raw, idx: int, node_ids: set) -> FlowEdge:
    path = f"$.edges[{idx}]"
    if not isinstance(raw, dict):
        raise SchemaError("invalid_value", path, "edge must be an object")
    for key in raw:
        if key not in ("source", "target", "label"):
            raise SchemaError("unknown_key", f"{path}.{key}", f"unknown edge key {key!r}")
    source = _want(raw, "source", str, path)
    target = _want(raw, "target", str, path)
    label = raw.get("label")
    if label is not None and not isinstance(label, str):
        raise SchemaError("invalid_value", f"{path}.label", "label must be string|null")
    for end, value in (("source", source), ("target", target)):
        if value not in node_ids:
            raise SchemaError(
                "dangling_edge", f"{path}.{end}", f"edge {end} {value!r} is not a node"
            )
    return FlowEdge(source=source, target=target, label=label)


def validate_diagram(doc: dict) -> FlowchartDiagram:
    """Validate an already-decoded diagram document."""
    if not isinstance(doc, dict):
        raise SchemaError("invalid_value", "$", "document must be a JSON object")
    for key in doc:
        if key not in _TOP_KEYS:
            raise SchemaError("unknown_key", f"$.{key}", f"unknown top-level key {key!r}")
    pathway_name = _want(doc, "pathway_name", str, "$")
    source_document = _want(doc, "source_document", str, "$")
    pages = _want(doc, "pages", int, "$")
    if isinstance(pages, bool) or pages < 1:
        raise SchemaError("invalid_value", "$.pages", "pages must be a positive integer")
    nodes_raw = _want(doc, "nodes", list, "$")
    edges_raw = _want(doc, "edges", list, "$")
    if not nodes_raw:
        raise SchemaError("missing_field", "$.nodes", "at least one node is required")

    nodes = []
    seen = set()
    for i, raw in enumerate(nodes_raw):
        node = _parse_node(raw, i)
        if node.id in seen:
            raise SchemaError(
                "duplicate_node_id", f"$.nodes[{i}].id", f"duplicate node id {node.id!r}"
            )
        seen.add(node.id)
        nodes.append(node)

    edges = []
    triples = set()
    for i, raw in enumerate(edges_raw):
        edge = _parse_edge(raw, i, seen)
        triple = (edge.source, edge.target, edge.label)
        if triple in triples:
            raise SchemaError(
                "duplicate_edge", f"$.edges[{i}]", f"duplicate edge {triple!r}"
            )
        triples.add(triple)
        edges.append(edge)

    return FlowchartDiagram(
        pathway_name=pathway_name,
        source_document=source_document,
        pages=pages,
        nodes=tuple(nodes),
        edges=tuple(edges),
    )


def parse_diagram(document: str) -> FlowchartDiagram:
    """Parse and validate diagram JSON text; any violation aborts ingestion."""
    try:
        doc = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJsonError(f"not parseable as JSON: {exc}") from exc
    return validate_diagram(doc)


# Extractor backends turn opaque source bytes into a diagram document.
# The bundled baseline only accepts already-structured diagram JSON; any
# backend's output is re-validated, never repaired.
_EXTRACTORS: Dict[str, Callable[[bytes], FlowchartDiagram]] = {}


def register_extractor(backend: str, fn: Callable[[bytes], FlowchartDiagram]) -> None:
    _EXTRACTORS[backend] = fn


def extractor_backends() -> List[str]:
    return sorted(_EXTRACTORS)


def extract(source: bytes, backend: str = "passthrough") -> FlowchartDiagram:
    if backend not in _EXTRACTORS:
        raise BackendUnknownError(f"unknown extractor backend {backend!r}")
    diagram = _EXTRACTORS[backend](source)
    # re-validate regardless of backend
    return validate_diagram(diagram.to_dict())


def _passthrough(source: bytes) -> FlowchartDiagram:
    try:
        text = source.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedJsonError(f"not UTF-8: {exc}") from exc
    return parse_diagram(text)


register_extractor("passthrough", _passthrough)
