"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import List, Optional, Set, Tuple

from pathwise.diagram import FlowchartDiagram, parse_diagram

FIXTURES = Path(__file__).parent / "fixtures"

# node texts drawn from the default lexicon's reach: some computable,
# some ambiguous, some inert
COMPUTABLE_TEXTS = [
    "FIT result >= 10",
    "FIT result < 4",
    "Patient presents with iron deficiency anaemia",
    "Haemoptysis reported",
    "Pigmented skin lesion",
    "Lesion diameter >= 6 mm",
    "Rectal bleeding",
    "Dysphagia",
    "age >= 40",
    "Chronic cough",
]
AMBIGUOUS_TEXTS = [
    "High risk of cancer",
    "Further investigation indicated",
    "Consider referral if appropriate",
    "Significant weight loss",
    "Clinical suspicion of malignancy",
]
INERT_TEXTS = [
    "Discuss with patient",
    "Record outcome in notes",
    "Arrange follow up",
    "Complete referral form",
]


def build_diagram(
    nodes: List[Tuple[str, str, str]],
    edges: List[Tuple[str, str, Optional[str]]],
    name: str = "Test Pathway",
) -> FlowchartDiagram:
    """(id, node_type, text) triples plus (source, target, label) edges."""
    doc = {
        "pathway_name": name,
        "source_document": "https://example.org/test",
        "pages": 1,
        "nodes": [
            {
                "id": nid,
                "node_type": ntype,
                "bbox": {"x": 0.5, "y": 0.5, "w": 0.1, "h": 0.05},
                "text": text,
            }
            for nid, ntype, text in nodes
        ],
        "edges": [
            {"source": s, "target": t, "label": label} for s, t, label in edges
        ],
    }
    return parse_diagram(json.dumps(doc))


def chain_diagram() -> FlowchartDiagram:
    return build_diagram(
        [("S", "start_block", "start"), ("A", "action_block", "do"), ("E", "end_block", "done")],
        [("S", "A", None), ("A", "E", None)],
    )


def random_graph_diagram(rng: random.Random, max_nodes: int = 12) -> FlowchartDiagram:
    """Small random digraph, mixed acyclic/cyclic, schema-valid."""
    n = rng.randint(2, max_nodes)
    ids = [f"N{i}" for i in range(n)]
    types = []
    for i in range(n):
        roll = rng.random()
        if i == 0 and rng.random() < 0.7:
            types.append("start_block")
        elif roll < 0.15:
            types.append("end_block")
        elif roll < 0.25:
            types.append("decision_diamond")
        elif roll < 0.35:
            types.append("annotation")
        else:
            types.append(rng.choice(["criteria_block", "action_block", "process_block"]))
    edges = set()
    for _ in range(rng.randint(0, 2 * n)):
        u, v = rng.choice(ids), rng.choice(ids)
        if u != v:
            edges.add((u, v))
    nodes = [(nid, t, f"text {nid}") for nid, t in zip(ids, types)]
    return build_diagram(nodes, [(u, v, None) for u, v in sorted(edges)])


def layered_diagram(rng: random.Random, total_nodes: int) -> FlowchartDiagram:
    """Layered DAG with optional back edge; always has a start and an end.

    Node texts are sampled so the semantic audit sees a realistic mix of
    computable, ambiguous, and inert content.
    """
    total_nodes = max(3, total_nodes)
    inner = total_nodes - 2
    layers: List[List[str]] = []
    count = 0
    while count < inner:
        width = min(rng.randint(1, 3), inner - count)
        layers.append([f"L{len(layers)}_{k}" for k in range(width)])
        count += width

    nodes = [("Start", "start_block", rng.choice(COMPUTABLE_TEXTS))]
    edges: List[Tuple[str, str, Optional[str]]] = []
    for layer in layers:
        for nid in layer:
            text = rng.choice(COMPUTABLE_TEXTS + AMBIGUOUS_TEXTS + INERT_TEXTS)
            ntype = rng.choice(["criteria_block", "decision_diamond", "process_block"])
            nodes.append((nid, ntype, text))
    nodes.append(("End", "end_block", "Terminal outcome"))

    previous = ["Start"]
    for layer in layers:
        for nid in layer:
            edges.append((rng.choice(previous), nid, None))
        for source in previous:
            if rng.random() < 0.4:
                edges.append((source, rng.choice(layer), None))
        previous = layer
    for source in previous:
        edges.append((source, "End", None))
    if len(layers) >= 2 and rng.random() < 0.4:
        # back edge introduces a cycle
        edges.append((layers[-1][0], layers[0][0], None))
    unique = sorted(set(edges))
    return build_diagram(nodes, unique, name=f"Fuzz Pathway {rng.randint(0, 10**6)}")


def fuzz_corpus(seed: int = 7, size: int = 60) -> List[FlowchartDiagram]:
    rng = random.Random(seed)
    return [
        layered_diagram(rng, rng.randint(3, 45))
        for _ in range(size)
    ]


# ---------------------------------------------------------------------------
# independent journey oracle (breadth-first frontier extension, set-valued)


def oracle_journeys(diagram: FlowchartDiagram) -> Set[Tuple[Tuple[str, ...], bool]]:
    starts = sorted(n.id for n in diagram.nodes if n.node_type == "start_block")
    if not starts:
        indeg = {n.id: 0 for n in diagram.nodes}
        for e in diagram.edges:
            indeg[e.target] += 1
        starts = sorted(
            n.id
            for n in diagram.nodes
            if indeg[n.id] == 0 and n.node_type != "annotation"
        )
    ends = {n.id for n in diagram.nodes if n.node_type == "end_block"}
    if not ends:
        outdeg = {n.id: 0 for n in diagram.nodes}
        for e in diagram.edges:
            outdeg[e.source] += 1
        ends = {n.id for n in diagram.nodes if outdeg[n.id] == 0}

    succ = {n.id: set() for n in diagram.nodes}
    for e in diagram.edges:
        succ[e.source].add(e.target)

    results: Set[Tuple[Tuple[str, ...], bool]] = set()
    frontier = [(s,) for s in starts]
    while frontier:
        extended = []
        for path in frontier:
            last = path[-1]
            if last in ends:
                results.add((path, False))
                continue
            for nxt in succ[last]:
                if nxt in path:
                    results.add((path + (nxt,), True))
                else:
                    extended.append(path + (nxt,))
        frontier = extended
    return results
