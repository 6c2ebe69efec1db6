"""End-to-end pipeline runs, artifact layout, determinism, failure exit
codes, and the command-line surface."""

import hashlib
import json

import pytest
from click.testing import CliRunner

from pathwise.cli import main
from pathwise.errors import StartupCheckError
from pathwise.pipeline import (
    PhaseFailure,
    PipelineConfig,
    load_artifact_dir,
    run_pipeline,
    slugify,
)

SLUG = "anaemia_referral_pathway"

EXPECTED_SUFFIXES = (
    "_diagram.json",
    "_audit.json",
    "_cql_audit.json",
    "_governance.json",
    "_definitions.cql",
    "_routing.cql",
    "_terminology.csv",
    "_pipeline.log",
)


def run_fixture(fixtures_dir, out_dir, name="pathway_anaemia", **overrides):
    config = PipelineConfig(
        diagram_path=fixtures_dir / f"{name}.json",
        terminology_path=fixtures_dir / "terminology.csv",
        out_dir=out_dir,
        **overrides,
    )
    return run_pipeline(config)


def test_slugify():
    assert slugify("Anaemia Referral Pathway") == SLUG
    assert slugify("  odd!! name  ") == "odd_name"


def test_pipeline_emits_all_artifacts(fixtures_dir, tmp_path):
    result = run_fixture(fixtures_dir, tmp_path)
    assert result.slug == SLUG
    assert result.iterations_used == 1
    for suffix in EXPECTED_SUFFIXES:
        assert (tmp_path / f"{SLUG}{suffix}").exists(), suffix


def test_artifacts_are_loadable_and_consistent(fixtures_dir, tmp_path):
    run_fixture(fixtures_dir, tmp_path)
    audit = json.loads((tmp_path / f"{SLUG}_audit.json").read_text())
    assert audit["journey_count"] == len(audit["journeys"])
    governance = json.loads((tmp_path / f"{SLUG}_governance.json").read_text())
    assert "counts" in governance or "passed" in governance
    slug, diagram, defs, routing = load_artifact_dir(tmp_path)
    assert slug == SLUG
    assert diagram.pathway_name == "Anaemia Referral Pathway"
    assert routing.define("Recommended Action") is not None


def test_pipeline_is_deterministic(fixtures_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_fixture(fixtures_dir, a)
    run_fixture(fixtures_dir, b)
    for suffix in EXPECTED_SUFFIXES:
        if suffix == "_pipeline.log":
            continue  # timings differ run to run
        first = (a / f"{SLUG}{suffix}").read_bytes()
        second = (b / f"{SLUG}{suffix}").read_bytes()
        assert hashlib.sha256(first).digest() == hashlib.sha256(second).digest(), suffix


def test_ingest_failure_exit_code(fixtures_dir, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(PhaseFailure) as exc:
        run_pipeline(
            PipelineConfig(
                diagram_path=bad,
                terminology_path=fixtures_dir / "terminology.csv",
                out_dir=tmp_path / "out",
            )
        )
    assert exc.value.phase == "ingest"
    assert exc.value.exit_code == 11


def test_graph_failure_exit_code(fixtures_dir, tmp_path):
    doc = json.loads((fixtures_dir / "pathway_anaemia.json").read_text())
    for node in doc["nodes"]:
        node["node_type"] = "process_block"
    doc["edges"] = [
        {"source": "E1", "target": "S", "label": None},
        {"source": "S", "target": "E1", "label": None},
        {"source": "E2", "target": "C1", "label": None},
        {"source": "C1", "target": "E2", "label": None},
        {"source": "C2", "target": "S", "label": None},
        {"source": "S", "target": "C2", "label": None},
    ]
    cyclic = tmp_path / "cyclic.json"
    cyclic.write_text(json.dumps(doc))
    with pytest.raises(PhaseFailure) as exc:
        run_pipeline(
            PipelineConfig(
                diagram_path=cyclic,
                terminology_path=fixtures_dir / "terminology.csv",
                out_dir=tmp_path / "out",
            )
        )
    assert exc.value.phase == "graph_audit"
    assert exc.value.exit_code == 12
    assert exc.value.cause.code == "E_NO_ENTRY"


def test_log_flushed_on_phase_failure(fixtures_dir, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"pathway_name": 5}))
    out = tmp_path / "out"
    with pytest.raises(PhaseFailure):
        run_pipeline(
            PipelineConfig(
                diagram_path=bad,
                terminology_path=fixtures_dir / "terminology.csv",
                out_dir=out,
            )
        )
    logs = list(out.glob("*_pipeline.log"))
    assert logs and "ingest" in logs[0].read_text()


def test_startup_check_rejects_tampered_routing(fixtures_dir, tmp_path):
    run_fixture(fixtures_dir, tmp_path)
    routing_path = tmp_path / f"{SLUG}_routing.cql"
    text = routing_path.read_text().replace('"C1_Criteria"', '"C9_Criteria"')
    routing_path.write_text(text)
    with pytest.raises(StartupCheckError) as exc:
        load_artifact_dir(tmp_path)
    assert exc.value.code == "E_STARTUP_CHECK"


def test_startup_check_rejects_missing_artifact(fixtures_dir, tmp_path):
    run_fixture(fixtures_dir, tmp_path)
    (tmp_path / f"{SLUG}_terminology.csv").unlink()
    with pytest.raises(StartupCheckError):
        load_artifact_dir(tmp_path)


# --- command line ---------------------------------------------------------


def test_cli_run_and_enumerate(fixtures_dir, tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "run",
            "--diagram",
            str(fixtures_dir / "pathway_anaemia.json"),
            "--terminology",
            str(fixtures_dir / "terminology.csv"),
            "--out",
            str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / f"{SLUG}_routing.cql").exists()

    result = runner.invoke(
        main, ["enumerate", "--diagram", str(fixtures_dir / "pathway_anaemia.json")]
    )
    assert result.exit_code == 0
    audit = json.loads(result.output)
    assert audit["journey_count"] == 2


def test_cli_run_failure_maps_phase_to_exit_code(fixtures_dir, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "run",
            "--diagram",
            str(bad),
            "--terminology",
            str(fixtures_dir / "terminology.csv"),
            "--out",
            str(tmp_path / "out"),
        ],
    )
    assert result.exit_code == 11


def test_cli_check_reports_errors(fixtures_dir, tmp_path):
    lib = tmp_path / "lib.cql"
    lib.write_text(
        "library Broken version '1.0.0'\n" 'define "A": "Missing"\n'
    )
    runner = CliRunner()
    result = runner.invoke(main, ["check", str(lib)])
    assert result.exit_code == 1
    assert "E_UNDEFINED_IDENT" in result.output


def test_cli_check_passes_clean_library(fixtures_dir, tmp_path):
    run_fixture(fixtures_dir, tmp_path)
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "check",
            str(tmp_path / f"{SLUG}_routing.cql"),
            "--deps",
            str(tmp_path / f"{SLUG}_definitions.cql"),
            "--terminology",
            str(fixtures_dir / "terminology.csv"),
        ],
    )
    assert result.exit_code == 0, result.output


def test_cli_journey_cap_flag(fixtures_dir, tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "enumerate",
            "--diagram",
            str(fixtures_dir / "big_cyclic_diagram.json"),
            "--journey-cap",
            "10",
        ],
    )
    assert result.exit_code != 0
    assert "E_PATH_EXPLOSION" in result.output
