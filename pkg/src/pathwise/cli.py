"""Command-line entry points.

Exit codes: 0 on success; 11-14 for pipeline phase failures (ingest,
graph audit, semantic audit, code generation); 2 for usage errors.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .cql.checker import check_library
from .cql.parser import parse_library
from .diagram import parse_diagram
from .errors import PathwiseError
from .graph_audit import DEFAULT_JOURNEY_CAP, audit_graph
from .pipeline import (
    PhaseFailure,
    PipelineConfig,
    load_artifact_dir,
    run_pipeline,
)
from .terminology import empty_dictionary, load_dictionary


@click.group()
def main():
    """Clinical pathway flowcharts to verified CQL decision services."""


@main.command()
@click.option("--diagram", "diagram_path", required=True, type=click.Path(exists=True))
@click.option(
    "--terminology", "terminology_path", required=True, type=click.Path(exists=True)
)
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", default="out", type=click.Path())
@click.option("--journey-cap", default=DEFAULT_JOURNEY_CAP, show_default=True)
@click.option("--version", "library_version", default="1.0.0", show_default=True)
@click.option("--generator", "generator_backend", default="deterministic")
@click.option("--auditor", "auditor_backend", default="lexicon")
def run(
    diagram_path,
    terminology_path,
    lexicon_path,
    out_dir,
    journey_cap,
    library_version,
    generator_backend,
    auditor_backend,
):
    """Run the batch pipeline and write all artifacts."""
    config = PipelineConfig(
        diagram_path=Path(diagram_path),
        terminology_path=Path(terminology_path),
        lexicon_path=Path(lexicon_path) if lexicon_path else None,
        out_dir=Path(out_dir),
        library_version=library_version,
        journey_cap=journey_cap,
        generator_backend=generator_backend,
        auditor_backend=auditor_backend,
    )
    try:
        result = run_pipeline(config)
    except PhaseFailure as exc:
        click.echo(str(exc), err=True)
        sys.exit(exc.exit_code)
    click.echo(f"wrote {len(result.artifacts)} artifacts to {result.out_dir}")


@main.command()
@click.option(
    "--artifacts",
    "artifact_dirs",
    multiple=True,
    required=True,
    type=click.Path(exists=True, file_okay=False),
)
@click.option("--port", default=8080, show_default=True)
@click.option("--bind", default="127.0.0.1", show_default=True)
def serve(artifact_dirs, port, bind):
    """Serve checked pathway libraries as a CDS Hooks service."""
    try:
        app = build_service(artifact_dirs)
    except PathwiseError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)

    import uvicorn

    uvicorn.run(app, host=bind, port=port)


def build_service(artifact_dirs):
    """Registration loading shared by `serve` and the test suite."""
    from .cds_service import ServiceRegistration, create_app

    registrations = []
    for directory in artifact_dirs:
        slug, diagram, defs, routing = load_artifact_dir(Path(directory))
        registrations.append(
            ServiceRegistration.build(slug, defs, routing, diagram)
        )
    return create_app(registrations)


@main.command()
@click.argument("library", type=click.Path(exists=True))
@click.option("--deps", "dep_paths", multiple=True, type=click.Path(exists=True))
@click.option("--terminology", "terminology_path", type=click.Path(exists=True))
def check(library, dep_paths, terminology_path):
    """Standalone critic: parse and check a CQL-subset library."""
    dictionary = (
        load_dictionary(terminology_path) if terminology_path else empty_dictionary()
    )
    try:
        lib = parse_library(Path(library).read_text("utf-8"))
        deps = [parse_library(Path(p).read_text("utf-8")) for p in dep_paths]
    except PathwiseError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    report = check_library(lib, deps, dictionary)
    for issue in report.errors:
        click.echo(f"error {issue.code} {issue.location}: {issue.message}")
    for issue in report.warnings:
        click.echo(f"warning {issue.code} {issue.location}: {issue.message}")
    if not report.ok:
        sys.exit(1)
    click.echo("ok")


@main.command()
@click.option("--diagram", "diagram_path", required=True, type=click.Path(exists=True))
@click.option("--journey-cap", default=DEFAULT_JOURNEY_CAP, show_default=True)
def enumerate(diagram_path, journey_cap):
    """Standalone graph audit: print the audit JSON to stdout."""
    try:
        diagram = parse_diagram(Path(diagram_path).read_text("utf-8"))
        audit = audit_graph(diagram, cap=journey_cap)
    except PathwiseError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    click.echo(audit.to_json(), nl=False)


if __name__ == "__main__":
    main()
