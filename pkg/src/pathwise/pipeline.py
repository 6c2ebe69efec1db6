"""Batch orchestration: ingest through routing generation, artifact emission.

Artifacts per pathway: ``<slug>_diagram.json``, ``<slug>_audit.json``,
``<slug>_cql_audit.json``, ``<slug>_definitions.cql``,
``<slug>_routing.cql``, ``<slug>_governance.json``,
``<slug>_terminology.csv`` (copied so the service can re-check), and
``<slug>_pipeline.log`` (timings; excluded from determinism comparisons).
"""

from __future__ import annotations

import json
import re
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from . import codegen
from .cql.checker import check_library, extract_bindings
from .cql.parser import parse_library
from .cql.printer import print_library
from .diagram import FlowchartDiagram, parse_diagram
from .errors import PathwiseError, StartupCheckError
from .graph_audit import DEFAULT_JOURNEY_CAP, audit_graph
from .semantic_audit import AuditLexicon, default_lexicon, get_auditor
from .terminology import load_dictionary

PHASE_EXIT_CODES = {
    "ingest": 11,
    "graph_audit": 12,
    "semantic_audit": 13,
    "codegen": 14,
}


@dataclass
class PipelineConfig:
    diagram_path: Path
    terminology_path: Path
    out_dir: Path
    lexicon_path: Optional[Path] = None
    library_version: str = "1.0.0"
    journey_cap: int = DEFAULT_JOURNEY_CAP
    generator_backend: str = "deterministic"
    auditor_backend: str = "lexicon"


@dataclass
class PipelineResult:
    slug: str
    out_dir: Path
    artifacts: List[Path] = field(default_factory=list)
    iterations_used: int = 0


class PhaseFailure(PathwiseError):
    def __init__(self, phase: str, cause: PathwiseError):
        super().__init__(f"phase {phase} failed: {cause}")
        self.phase = phase
        self.cause = cause
        self.exit_code = PHASE_EXIT_CODES[phase]


def slugify(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower() or "pathway"


def base_name(name: str) -> str:
    words = re.findall(r"[A-Za-z0-9]+", name)
    return "".join(w.capitalize() for w in words) or "Pathway"


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_lines: List[str] = []
    artifacts: List[Path] = []

    def emit(path: Path, text: str) -> None:
        path.write_text(text, encoding="utf-8", newline="\n")
        artifacts.append(path)

    def phase(name: str):
        start = time.perf_counter()

        def done(note: str = "ok"):
            log_lines.append(
                f"phase {name}: {note} ({time.perf_counter() - start:.3f}s)"
            )

        return done

    # Phase 1: ingest
    done = phase("ingest")
    try:
        diagram = parse_diagram(Path(config.diagram_path).read_text("utf-8"))
        dictionary = load_dictionary(config.terminology_path)
        lexicon = (
            AuditLexicon.load(config.lexicon_path)
            if config.lexicon_path
            else default_lexicon()
        )
    except PathwiseError as exc:
        log_lines.append(f"phase ingest: failed with {exc.code}")
        # the pathway name may be unknown at this point
        _flush_log(out_dir, Path(config.diagram_path).stem, log_lines)
        raise PhaseFailure("ingest", exc) from exc
    slug = slugify(diagram.pathway_name)
    emit(out_dir / f"{slug}_diagram.json", diagram.to_json())
    done()

    # Phases 2 and 3 are independent given the validated diagram
    done = phase("graph_audit")
    try:
        audit = audit_graph(diagram, cap=config.journey_cap)
    except PathwiseError as exc:
        log_lines.append(f"phase graph_audit: failed with {exc.code}")
        _flush_log(out_dir, slug, log_lines)
        raise PhaseFailure("graph_audit", exc) from exc
    emit(out_dir / f"{slug}_audit.json", audit.to_json())
    done(f"{audit.journey_count} journeys")

    done = phase("semantic_audit")
    try:
        auditor = get_auditor(config.auditor_backend)
        cql_audit = auditor(diagram, lexicon)
    except PathwiseError as exc:
        log_lines.append(f"phase semantic_audit: failed with {exc.code}")
        _flush_log(out_dir, slug, log_lines)
        raise PhaseFailure("semantic_audit", exc) from exc
    emit(out_dir / f"{slug}_cql_audit.json", cql_audit.to_json())
    governance = {
        "pathway_name": cql_audit.pathway_name,
        "counts": cql_audit.counts,
        "findings": [
            {"node_id": a.node_id, **f.to_dict()}
            for a in cql_audit.node_audits
            for f in a.findings
        ],
    }
    emit(
        out_dir / f"{slug}_governance.json",
        json.dumps(governance, indent=2, ensure_ascii=False) + "\n",
    )
    done(f"{cql_audit.counts['passed']} passed")

    # Phase 4: definitions (critic loop) then routing (critic check)
    done = phase("codegen")
    try:
        ctx = codegen.GenerationContext(
            diagram=diagram,
            audit=cql_audit,
            dictionary=dictionary,
            library_base_name=base_name(diagram.pathway_name),
            version=config.library_version,
        )
        outcome = codegen.critic_loop(ctx, generator=config.generator_backend)
        bindings = extract_bindings(outcome.library)
        routing = codegen.generate_routing(
            list(audit.journeys), bindings, diagram
        )
        routing_report = check_library(routing, [outcome.library], dictionary)
        if not routing_report.ok:
            raise StartupCheckError(
                "routing library failed checks",
                errors=[e.message for e in routing_report.errors],
            )
    except PathwiseError as exc:
        log_lines.append(f"phase codegen: failed with {exc.code}")
        _flush_log(out_dir, slug, log_lines)
        raise PhaseFailure("codegen", exc) from exc
    emit(out_dir / f"{slug}_definitions.cql", print_library(outcome.library))
    emit(out_dir / f"{slug}_routing.cql", print_library(routing))
    shutil.copyfile(config.terminology_path, out_dir / f"{slug}_terminology.csv")
    artifacts.append(out_dir / f"{slug}_terminology.csv")
    done(f"iterations_used={outcome.iterations_used}")

    _flush_log(out_dir, slug, log_lines)
    return PipelineResult(
        slug=slug,
        out_dir=out_dir,
        artifacts=artifacts,
        iterations_used=outcome.iterations_used,
    )


def _flush_log(out_dir: Path, slug: str, lines: List[str]) -> None:
    (out_dir / f"{slug}_pipeline.log").write_text(
        "\n".join(lines) + "\n", encoding="utf-8"
    )


def load_artifact_dir(directory: Path):
    """Load and re-check a pipeline output directory for serving.

    Returns (slug, diagram, defs, routing) or raises E_STARTUP_CHECK.
    """
    directory = Path(directory)
    diagrams = sorted(directory.glob("*_diagram.json"))
    if not diagrams:
        raise StartupCheckError(f"no *_diagram.json in {directory}")
    diagram_path = diagrams[0]
    slug = diagram_path.name[: -len("_diagram.json")]
    diagram = parse_diagram(diagram_path.read_text("utf-8"))

    defs_path = directory / f"{slug}_definitions.cql"
    routing_path = directory / f"{slug}_routing.cql"
    terminology_path = directory / f"{slug}_terminology.csv"
    for required in (defs_path, routing_path, terminology_path):
        if not required.exists():
            raise StartupCheckError(f"missing artifact {required.name}")

    dictionary = load_dictionary(terminology_path)
    defs = parse_library(defs_path.read_text("utf-8"))
    routing = parse_library(routing_path.read_text("utf-8"))

    defs_report = check_library(defs, [], dictionary)
    if not defs_report.ok:
        raise StartupCheckError(
            f"{defs_path.name} fails re-check",
            errors=[e.message for e in defs_report.errors],
        )
    routing_report = check_library(routing, [defs], dictionary)
    if not routing_report.ok:
        raise StartupCheckError(
            f"{routing_path.name} fails re-check",
            errors=[e.message for e in routing_report.errors],
        )
    return slug, diagram, defs, routing
