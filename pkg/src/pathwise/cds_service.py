"""CDS Hooks service: discovery plus patient-view card construction.

Registrations are immutable after startup; every invocation is a pure
function of (registration, request bundle, as_of), so identical requests
produce byte-identical responses.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .cql import ast
from .diagram import FlowchartDiagram
from .errors import BundleError, PathwiseError
from .fhir_eval import EvaluationResult, evaluate, load_bundle
from .graph_audit import enumerate_journeys

DEFAULT_URGENCY_COLORS = ("red", "#ff0000", "crimson", "darkred")
DEFAULT_REFERRAL_PATTERN = r"refer"


@dataclass(frozen=True)
class ServiceRegistration:
    service_id: str
    title: str
    description: str
    defs: ast.CqlLibrary
    routing: ast.CqlLibrary
    diagram: FlowchartDiagram
    hook: str = "patient-view"
    urgency_colors: Tuple[str, ...] = DEFAULT_URGENCY_COLORS
    referral_pattern: str = DEFAULT_REFERRAL_PATTERN
    journey_steps: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    @staticmethod
    def build(
        service_id: str,
        defs: ast.CqlLibrary,
        routing: ast.CqlLibrary,
        diagram: FlowchartDiagram,
        urgency_colors: Tuple[str, ...] = DEFAULT_URGENCY_COLORS,
        referral_pattern: str = DEFAULT_REFERRAL_PATTERN,
    ) -> "ServiceRegistration":
        journeys = enumerate_journeys(diagram)
        steps = {
            f"Journey_{i}": tuple(j.steps)
            for i, j in enumerate(journeys, start=1)
        }
        return ServiceRegistration(
            service_id=service_id,
            title=diagram.pathway_name,
            description=f"Decision support for {diagram.pathway_name}",
            defs=defs,
            routing=routing,
            diagram=diagram,
            urgency_colors=urgency_colors,
            referral_pattern=referral_pattern,
            journey_steps=steps,
        )


@dataclass(frozen=True)
class CdsCard:
    summary: str
    detail: str
    indicator: str
    source: Dict[str, str]
    suggestions: Tuple[dict, ...]
    review_items: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "summary": self.summary,
            "detail": self.detail,
            "indicator": self.indicator,
            "source": dict(self.source),
            "suggestions": [dict(s) for s in self.suggestions],
            "extension": {"review_items": list(self.review_items)},
        }


def _node_text(diagram: FlowchartDiagram, node_id: str) -> str:
    if diagram.has_node(node_id):
        return diagram.node(node_id).text or node_id
    return node_id


def build_card(result: EvaluationResult, reg: ServiceRegistration) -> CdsCard:
    """Map the evaluation outcome back to the visual representation."""
    summary = result.recommended_action[:140]

    if result.matched_journey is not None:
        steps = reg.journey_steps.get(result.matched_journey, ())
        detail = " -> ".join(_node_text(reg.diagram, s) for s in steps)
    else:
        detail = (
            "No enumerated journey matched this record; "
            "see review items and the source pathway."
        )

    review_items = []
    for flag in result.review_flags:
        text = _node_text(reg.diagram, flag.node_id)
        review_items.append(
            f"REQUIRES_HUMAN_REVIEW: {flag.reason} at node "
            f"{flag.node_id} ({text})"
        )

    indicator = "info"
    if review_items:
        indicator = "warning"
    if result.matched_journey is not None:
        steps = reg.journey_steps.get(result.matched_journey, ())
        if steps and reg.diagram.has_node(steps[-1]):
            visual = reg.diagram.node(steps[-1]).visual
            urgent = visual.background_color.lower() in {
                c.lower() for c in reg.urgency_colors
            } or (visual.font_weight == "bold" and visual.text_case == "upper")
            if urgent:
                indicator = "critical"

    suggestions: List[dict] = []
    if result.matched_journey is not None and re.search(
        reg.referral_pattern, result.recommended_action, re.IGNORECASE
    ):
        suggestions.append(
            {
                "label": f"Order referral: {result.recommended_action[:100]}",
                "actions": [
                    {
                        "type": "create",
                        "description": "Draft referral ServiceRequest",
                        "resource": {
                            "resourceType": "ServiceRequest",
                            "status": "draft",
                            "intent": "proposal",
                            "code": {"text": result.recommended_action},
                            "authoredOn": result.as_of.isoformat(),
                        },
                    }
                ],
            }
        )

    return CdsCard(
        summary=summary,
        detail=detail,
        indicator=indicator,
        source={
            "label": reg.diagram.pathway_name,
            "url": reg.diagram.source_document,
        },
        suggestions=tuple(suggestions),
        review_items=tuple(review_items),
    )


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(registrations: List[ServiceRegistration]) -> FastAPI:
    services = {reg.service_id: reg for reg in registrations}
    app = FastAPI(title="pathwise CDS Hooks service")

    @app.get("/cds-services")
    def discovery():
        return {
            "services": [
                {
                    "id": reg.service_id,
                    "hook": reg.hook,
                    "title": reg.title,
                    "description": reg.description,
                }
                for _, reg in sorted(services.items())
            ]
        }

    @app.post("/cds-services/{service_id}")
    async def invoke(service_id: str, request: dict):
        reg = services.get(service_id)
        if reg is None:
            return _error(404, "unknown service")
        if request.get("hook") != reg.hook:
            return _error(422, f"unsupported hook {request.get('hook')!r}")
        context = request.get("context") or {}
        if "patientId" not in context:
            return _error(400, "context.patientId is required")
        prefetch = request.get("prefetch") or {}
        bundle = prefetch.get("patientBundle")
        if bundle is None:
            return _error(400, "prefetch.patientBundle is required")

        as_of_raw = context.get("asOf")
        if as_of_raw is not None:
            try:
                as_of = dt.date.fromisoformat(str(as_of_raw)[:10])
            except ValueError:
                return _error(400, "context.asOf is not an ISO date")
        else:
            as_of = dt.date.today()

        try:
            record = load_bundle(
                bundle if isinstance(bundle, str) else json.dumps(bundle)
            )
        except BundleError as exc:
            return _error(400, str(exc))

        try:
            result = evaluate(reg.defs, reg.routing, record, as_of)
        except PathwiseError as exc:
            return _error(500, str(exc))

        card = build_card(result, reg)
        return JSONResponse(status_code=200, content={"cards": [card.to_dict()]})

    return app
