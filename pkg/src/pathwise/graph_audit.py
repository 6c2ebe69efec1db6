"""Deterministic structural analysis and patient-journey enumeration.

This phase contains no heuristics: entry/end resolution, DFS order and
loop handling are all fixed, so repeated runs on the same diagram produce
byte-identical audits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .diagram import FlowchartDiagram
from .errors import NoEntryError, PathExplosionError

DEFAULT_JOURNEY_CAP = 100_000


@dataclass(frozen=True)
class Journey:
    steps: Tuple[str, ...]
    loop_terminated: bool = False
    loop_node: Optional[str] = None

    def rendered_steps(self) -> List[str]:
        """Node ids with the loop re-entry rendered as ``"<id> (LOOP)"``."""
        if not self.loop_terminated:
            return list(self.steps)
        return list(self.steps[:-1]) + [f"{self.steps[-1]} (LOOP)"]


@dataclass(frozen=True)
class GraphAudit:
    node_count: int
    edge_count: int
    orphan_nodes: Tuple[str, ...]
    dead_end_nodes: Tuple[str, ...]
    has_cycle: bool
    journey_count: int
    avg_steps: float
    min_steps: int
    max_steps: int
    journeys: Tuple[Journey, ...]
    diagnostics: Tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "orphan_nodes": list(self.orphan_nodes),
            "dead_end_nodes": list(self.dead_end_nodes),
            "has_cycle": self.has_cycle,
            "journey_count": self.journey_count,
            "avg_steps": self.avg_steps,
            "min_steps": self.min_steps,
            "max_steps": self.max_steps,
            "journeys": [j.rendered_steps() for j in self.journeys],
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def _adjacency(diagram: FlowchartDiagram) -> Dict[str, List[Tuple[str, str]]]:
    adj: Dict[str, List[Tuple[str, str]]] = {n.id: [] for n in diagram.nodes}
    for e in diagram.edges:
        adj[e.source].append((e.target, e.label or ""))
    for targets in adj.values():
        targets.sort()
    return adj


def find_entries(diagram: FlowchartDiagram) -> List[str]:
    """Entry nodes: explicit start_blocks, else non-annotation in-degree-0 nodes."""
    starts = sorted(n.id for n in diagram.nodes if n.node_type == "start_block")
    if starts:
        return starts
    indeg = {n.id: 0 for n in diagram.nodes}
    for e in diagram.edges:
        indeg[e.target] += 1
    fallback = sorted(
        n.id
        for n in diagram.nodes
        if indeg[n.id] == 0 and n.node_type != "annotation"
    )
    if not fallback:
        raise NoEntryError("no start_block and no in-degree-0 entry candidate")
    return fallback


def find_ends(diagram: FlowchartDiagram) -> List[str]:
    """End nodes: explicit end_blocks, else out-degree-0 nodes."""
    ends = sorted(n.id for n in diagram.nodes if n.node_type == "end_block")
    if ends:
        return ends
    outdeg = {n.id: 0 for n in diagram.nodes}
    for e in diagram.edges:
        outdeg[e.source] += 1
    return sorted(n.id for n in diagram.nodes if outdeg[n.id] == 0)


def enumerate_journeys(
    diagram: FlowchartDiagram, cap: int = DEFAULT_JOURNEY_CAP
) -> List[Journey]:
    """All simple entry-to-end paths, plus loop-terminated walks.

    Entries are visited in id order and outgoing edges in
    (target id, label) order. Reaching a node already on the current path
    emits a loop-terminated journey and stops that branch; reaching an end
    node emits a journey and stops (end nodes are terminal even if they
    have outgoing edges).
    """
    entries = find_entries(diagram)
    ends = set(find_ends(diagram))
    adj = _adjacency(diagram)

    journeys: List[Journey] = []

    def emit(journey: Journey) -> None:
        journeys.append(journey)
        if len(journeys) > cap:
            raise PathExplosionError(
                f"journey count exceeds cap {cap}", cap=cap
            )

    def walk(node: str, path: List[str], on_path: set) -> None:
        path.append(node)
        on_path.add(node)
        if node in ends:
            emit(Journey(steps=tuple(path)))
        else:
            for target, _label in adj[node]:
                if target in on_path:
                    emit(
                        Journey(
                            steps=tuple(path) + (target,),
                            loop_terminated=True,
                            loop_node=target,
                        )
                    )
                else:
                    walk(target, path, on_path)
        path.pop()
        on_path.remove(node)

    for entry in entries:
        walk(entry, [], set())
    return journeys


def has_cycle(diagram: FlowchartDiagram) -> bool:
    """Directed-cycle detection by iterative DFS coloring."""
    adj = _adjacency(diagram)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n.id: WHITE for n in diagram.nodes}
    for root in sorted(color):
        if color[root] != WHITE:
            continue
        stack: List[Tuple[str, int]] = [(root, 0)]
        color[root] = GRAY
        while stack:
            node, i = stack[-1]
            if i < len(adj[node]):
                stack[-1] = (node, i + 1)
                nxt = adj[node][i][0]
                if color[nxt] == GRAY:
                    return True
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, 0))
            else:
                color[node] = BLACK
                stack.pop()
    return False


def audit_graph(
    diagram: FlowchartDiagram, cap: int = DEFAULT_JOURNEY_CAP
) -> GraphAudit:
    incident = set()
    outdeg = {n.id: 0 for n in diagram.nodes}
    for e in diagram.edges:
        incident.add(e.source)
        incident.add(e.target)
        outdeg[e.source] += 1

    orphans = tuple(sorted(n.id for n in diagram.nodes if n.id not in incident))
    dead_ends = tuple(
        sorted(
            n.id
            for n in diagram.nodes
            if outdeg[n.id] == 0 and n.node_type != "end_block"
        )
    )

    diagnostics = []
    for n in diagram.nodes:
        if n.node_type == "end_block" and outdeg[n.id] > 0:
            diagnostics.append(f"end_block {n.id} has outgoing edges")
        if n.node_type == "annotation" and outdeg[n.id] > 0:
            diagnostics.append(f"annotation {n.id} has outgoing edges")

    journeys = enumerate_journeys(diagram, cap=cap)

    lengths = [len(j.steps) for j in journeys]
    return GraphAudit(
        node_count=len(diagram.nodes),
        edge_count=len(diagram.edges),
        orphan_nodes=orphans,
        dead_end_nodes=dead_ends,
        has_cycle=has_cycle(diagram),
        journey_count=len(journeys),
        avg_steps=(sum(lengths) / len(lengths)) if lengths else 0.0,
        min_steps=min(lengths) if lengths else 0,
        max_steps=max(lengths) if lengths else 0,
        journeys=tuple(journeys),
        diagnostics=tuple(diagnostics),
    )
