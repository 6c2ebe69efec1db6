"""Node-level computability audit.

A deterministic, lexicon-driven rules engine stands in for a model-based
auditor behind the same report contract, so the whole pipeline runs and
tests offline. Rules fire in fixed order: content_error, then
content_ambiguity, then content_complexity, then format_inconsistency.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .diagram import FlowchartDiagram, FlowNode

CATEGORIES = (
    "content_ambiguity",
    "content_complexity",
    "content_error",
    "format_inconsistency",
)

_WS = re.compile(r"\s+")

_COMPARATOR_WORDS = (
    ">=",
    "<=",
    ">",
    "<",
    "greater than",
    "less than",
    "more than",
    "at least",
    "at most",
    "over",
    "under",
    "above",
    "below",
)

_OP_WORDS = {
    "over": ">",
    "under": "<",
    "above": ">",
    "below": "<",
    "at least": ">=",
    "at most": "<=",
    "greater than": ">",
    "less than": "<",
    "more than": ">",
}

_LOOKBACK = re.compile(
    r"(?:within|past|last|previous|preceding)\s+(\d+)\s*(day|week|month|year)s?",
    re.IGNORECASE,
)
_LOOKBACK_DAYS = {"day": 1, "week": 7, "month": 30, "year": 365}

_AGE = re.compile(
    r"\bage[d]?\s*(>=|<=|>|<|=|over|under|at least|at most)\s*(\d+)", re.IGNORECASE
)


def _norm(text: str) -> str:
    return _WS.sub(" ", text.strip()).lower()


@dataclass(frozen=True)
class QuantityPattern:
    name: str  # surface name in node text, e.g. "FIT"
    concept: str  # dictionary concept term for the observation
    resource: str = "Observation"
    unit_required: bool = False

    def regex(self) -> re.Pattern:
        words = "|".join(re.escape(w) for w in _COMPARATOR_WORDS)
        return re.compile(
            rf"\b{re.escape(self.name)}\b(?:\s+(?:result|level|value|score))?\s*"
            rf"(?:is\s+)?({words})\s*(\d+(?:\.\d+)?)\s*([A-Za-z][A-Za-z/%]*)?",
            re.IGNORECASE,
        )


@dataclass(frozen=True)
class ConceptPattern:
    phrase: str
    resource: str = "Condition"


@dataclass(frozen=True)
class AuditLexicon:
    ambiguity_terms: Tuple[str, ...]
    complexity_terms: Tuple[str, ...]
    urgency_colors: Tuple[str, ...]
    quantity_patterns: Tuple[QuantityPattern, ...] = ()
    concept_patterns: Tuple[ConceptPattern, ...] = ()
    age_pattern_enabled: bool = True
    lookback_horizon_days: int = 365

    @staticmethod
    def from_dict(doc: dict) -> "AuditLexicon":
        quantity = []
        concepts = []
        age_enabled = False
        for raw in doc.get("computable_patterns", []):
            kind = raw.get("kind")
            if kind == "quantity":
                quantity.append(
                    QuantityPattern(
                        name=raw["name"],
                        concept=raw["concept"],
                        resource=raw.get("resource", "Observation"),
                        unit_required=bool(raw.get("unit_required", False)),
                    )
                )
            elif kind == "concept":
                concepts.append(
                    ConceptPattern(
                        phrase=raw["phrase"],
                        resource=raw.get("resource", "Condition"),
                    )
                )
            elif kind == "age":
                age_enabled = True
        return AuditLexicon(
            ambiguity_terms=tuple(doc.get("ambiguity_terms", ())),
            complexity_terms=tuple(doc.get("complexity_terms", ())),
            urgency_colors=tuple(doc.get("urgency_colors", ())),
            quantity_patterns=tuple(quantity),
            concept_patterns=tuple(concepts),
            age_pattern_enabled=age_enabled,
            lookback_horizon_days=int(doc.get("lookback_horizon_days", 365)),
        )

    @staticmethod
    def load(path) -> "AuditLexicon":
        return AuditLexicon.from_dict(json.loads(Path(path).read_text("utf-8")))


def default_lexicon() -> AuditLexicon:
    return AuditLexicon.load(Path(__file__).parent / "data" / "default_lexicon.json")


@dataclass(frozen=True)
class Finding:
    category: str
    detail: str
    evidence: str

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "detail": self.detail,
            "evidence": self.evidence,
        }


@dataclass(frozen=True)
class NodeAudit:
    node_id: str
    computable: bool
    findings: Tuple[Finding, ...]
    proposed_expression: Optional[str] = None
    informational: bool = False  # annotation nodes: no executable logic

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "computable": self.computable,
            "findings": [f.to_dict() for f in self.findings],
            "proposed_expression": self.proposed_expression,
            "informational": self.informational,
        }


@dataclass(frozen=True)
class CqlAuditReport:
    pathway_name: str
    node_audits: Tuple[NodeAudit, ...]
    counts: Dict[str, int] = field(default_factory=dict)

    def audit_for(self, node_id: str) -> Optional[NodeAudit]:
        for audit in self.node_audits:
            if audit.node_id == node_id:
                return audit
        return None

    def to_dict(self) -> dict:
        return {
            "pathway_name": self.pathway_name,
            "node_audits": [a.to_dict() for a in self.node_audits],
            "counts": dict(self.counts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


_INTERVAL_OPS = {
    ">": lambda v: (v, float("inf"), False, True),
    ">=": lambda v: (v, float("inf"), True, True),
    "<": lambda v: (float("-inf"), v, True, False),
    "<=": lambda v: (float("-inf"), v, True, True),
    "=": lambda v: (v, v, True, True),
}


def _intersect_empty(constraints: List[Tuple[str, float]]) -> bool:
    lo, hi = float("-inf"), float("inf")
    lo_closed, hi_closed = True, True
    for op, value in constraints:
        c_lo, c_hi, c_lc, c_hc = _INTERVAL_OPS[op](value)
        if c_lo > lo or (c_lo == lo and not c_lc):
            lo, lo_closed = c_lo, c_lc
        if c_hi < hi or (c_hi == hi and not c_hc):
            hi, hi_closed = c_hi, c_hc
    if lo > hi:
        return True
    if lo == hi and not (lo_closed and hi_closed):
        return True
    return False


def _canon_op(op: str) -> str:
    op = op.lower()
    return _OP_WORDS.get(op, op)


def audit_node(node: FlowNode, lexicon: AuditLexicon) -> NodeAudit:
    """Audit one node; total and deterministic."""
    if node.node_type == "annotation":
        return NodeAudit(
            node_id=node.id, computable=False, findings=(), informational=True
        )

    text = node.text
    norm = _norm(text)
    findings: List[Finding] = []

    # pattern matching (needed by several rules below)
    quantity_matches: List[Tuple[QuantityPattern, str, float, Optional[str]]] = []
    for pattern in lexicon.quantity_patterns:
        for m in pattern.regex().finditer(text):
            quantity_matches.append(
                (pattern, _canon_op(m.group(1)), float(m.group(2)), m.group(3))
            )
    concept_matches = [
        p for p in lexicon.concept_patterns if _norm(p.phrase) in norm
    ]
    age_match = _AGE.search(text) if lexicon.age_pattern_enabled else None

    # 1. content_error: contradictory thresholds or missing required unit
    by_name: Dict[str, List[Tuple[str, float]]] = {}
    for pattern, op, value, _unit in quantity_matches:
        by_name.setdefault(pattern.name, []).append((op, value))
    for name, constraints in sorted(by_name.items()):
        if len(constraints) > 1 and _intersect_empty(constraints):
            findings.append(
                Finding(
                    category="content_error",
                    detail=f"contradictory thresholds on {name}",
                    evidence="; ".join(f"{name} {op} {v:g}" for op, v in constraints),
                )
            )
    for pattern, op, value, unit in quantity_matches:
        if pattern.unit_required and unit is None:
            findings.append(
                Finding(
                    category="content_error",
                    detail=f"threshold on {pattern.name} lacks a required unit",
                    evidence=f"{pattern.name} {op} {value:g}",
                )
            )

    # 2. content_ambiguity: subjective phrases, or comparators without numbers
    for term in lexicon.ambiguity_terms:
        if _norm(term) in norm:
            findings.append(
                Finding(
                    category="content_ambiguity",
                    detail="subjective or threshold-free language",
                    evidence=term,
                )
            )
    if not any(ch.isdigit() for ch in text):
        for word in _COMPARATOR_WORDS:
            if word in norm:
                findings.append(
                    Finding(
                        category="content_ambiguity",
                        detail="comparator with no numeric threshold",
                        evidence=word,
                    )
                )
                break

    # 3. content_complexity: scoring/weighting language, deep lookback windows
    for term in lexicon.complexity_terms:
        if _norm(term) in norm:
            findings.append(
                Finding(
                    category="content_complexity",
                    detail="logic beyond the supported CQL subset",
                    evidence=term,
                )
            )
    for m in _LOOKBACK.finditer(text):
        days = int(m.group(1)) * _LOOKBACK_DAYS[m.group(2).lower()]
        if days > lexicon.lookback_horizon_days:
            findings.append(
                Finding(
                    category="content_complexity",
                    detail=f"lookback window of {days} days exceeds the "
                    f"{lexicon.lookback_horizon_days}-day horizon",
                    evidence=m.group(0),
                )
            )

    pattern_matched = bool(quantity_matches or concept_matches or age_match)

    # 4. format_inconsistency: visual urgency with no computable textual rule
    urgent = node.visual.background_color.lower() in {
        c.lower() for c in lexicon.urgency_colors
    } or (node.visual.font_weight == "bold" and node.visual.text_case == "upper")
    if urgent and not pattern_matched:
        findings.append(
            Finding(
                category="format_inconsistency",
                detail="visual urgency signal with no computable textual rule",
                evidence=f"background={node.visual.background_color} "
                f"font_weight={node.visual.font_weight} "
                f"text_case={node.visual.text_case}",
            )
        )

    disqualified = any(
        f.category in ("content_error", "content_ambiguity") for f in findings
    )
    computable = pattern_matched and not disqualified

    expression = None
    if computable:
        parts: List[str] = []
        for pattern, op, value, unit in quantity_matches:
            clauses = [f"R.value.value {op} {value:g}"]
            if unit is not None:
                clauses.append(f"R.value.unit = '{unit}'")
            parts.append(
                f'exists([{pattern.resource}: "{pattern.concept}"] '
                f"R where {' and '.join(clauses)})"
            )
        for pattern in concept_matches:
            parts.append(f'exists([{pattern.resource}: "{pattern.phrase}"])')
        if age_match:
            parts.append(
                f"AgeInYears() {_canon_op(age_match.group(1))} {age_match.group(2)}"
            )
        expression = " and ".join(parts)

    return NodeAudit(
        node_id=node.id,
        computable=computable,
        findings=tuple(findings),
        proposed_expression=expression,
    )


def audit_all(diagram: FlowchartDiagram, lexicon: AuditLexicon) -> CqlAuditReport:
    audits = tuple(audit_node(node, lexicon) for node in diagram.nodes)
    counts = {key: 0 for key in ("passed", "failed", "uncomputable") + CATEGORIES}
    for audit in audits:
        if audit.informational:
            continue  # annotations carry no executable logic
        if audit.computable:
            counts["passed"] += 1
        elif audit.findings:
            counts["failed"] += 1
        else:
            counts["uncomputable"] += 1
        # counts sum findings, not nodes: one node may be cited repeatedly
        for finding in audit.findings:
            counts[finding.category] += 1
    return CqlAuditReport(
        pathway_name=diagram.pathway_name, node_audits=audits, counts=counts
    )


# Pluggable auditor backends share the audit_all signature.
_AUDITORS: Dict[str, Callable[[FlowchartDiagram, AuditLexicon], CqlAuditReport]] = {
    "lexicon": audit_all
}


def register_auditor(backend: str, fn) -> None:
    _AUDITORS[backend] = fn


def get_auditor(backend: str):
    if backend not in _AUDITORS:
        from .errors import BackendUnknownError

        raise BackendUnknownError(f"unknown auditor backend {backend!r}")
    return _AUDITORS[backend]
