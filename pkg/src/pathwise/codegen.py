"""Generation of the definitions and routing libraries.

The baseline generator is deterministic templating over the audit report
and terminology dictionary; stochastic back-ends can be registered behind
the same contract, and the bounded critic loop verifies either kind.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Tuple

from .cql import ast
from .cql.checker import (
    SENTINEL,
    CheckReport,
    LibraryBindings,
    check_library,
)
from .cql.parser import parse_expression
from .diagram import FlowchartDiagram
from .errors import (
    BackendUnknownError,
    ContextMismatchError,
    CriticExhaustedError,
    MissingBindingError,
)
from .graph_audit import Journey, find_ends
from .semantic_audit import CqlAuditReport
from .terminology import TerminologyDictionary

PLACEHOLDER_SYSTEM_NAME = "UnmappedPlaceholder"
PLACEHOLDER_SYSTEM_URI = "urn:uuid:unmapped-placeholder"
PLACEHOLDER_CODE = "UNMAPPED"

FALLBACK_ACTION = "No pathway criteria met — clinical review required"
LOOP_ACTION = "Pathway loop — clinical review required"

MAX_CRITIC_ITERATIONS = 3


@dataclass(frozen=True)
class GenerationContext:
    diagram: FlowchartDiagram
    audit: CqlAuditReport
    dictionary: TerminologyDictionary
    library_base_name: str
    version: str = "1.0.0"


@dataclass(frozen=True)
class CriticOutcome:
    library: ast.CqlLibrary
    iterations_used: int
    final_report: CheckReport


def _pascal(term: str) -> str:
    words = re.findall(r"[A-Za-z0-9]+", term)
    return "".join(w.capitalize() for w in words) or "Concept"


def _slug(term: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", term).strip("_").lower() or "concept"


def define_kind(node_type: str, is_end: bool) -> str:
    if is_end:
        return "Outcome"
    if node_type in ("criteria_block", "decision_diamond", "start_block"):
        return "Criteria"
    return "Action"


def define_name_for(node_id: str, kind: str) -> str:
    return f"{node_id}_{kind}"


class _CodeTable:
    """Accumulates codesystem/code declarations during generation."""

    def __init__(self, dictionary: TerminologyDictionary):
        self.dictionary = dictionary
        self.systems: Dict[str, str] = {}  # uri -> local name
        self.codes: Dict[str, ast.CodeDecl] = {}  # concept term -> decl
        self._used_names: set = set()

    def _system_name(self, uri: str) -> str:
        if uri in self.systems:
            return self.systems[uri]
        if "snomed" in uri:
            name = "SNOMED"
        elif "loinc" in uri:
            name = "LOINC"
        else:
            name = f"CodeSystem{len(self.systems) + 1}"
        self.systems[uri] = name
        return name

    def resolve(self, concept_term: str) -> Tuple[str, bool]:
        """Return (local code name, matched) for a concept term."""
        if concept_term in self.codes:
            decl = self.codes[concept_term]
            return decl.name, SENTINEL not in decl.name
        match = self.dictionary.lookup(concept_term)
        if match.matched:
            entry = match.entry
            name = _pascal(concept_term)
            if name in self._used_names:
                name = f"{name}_{len(self.codes) + 1}"
            decl = ast.CodeDecl(
                name=name,
                code=entry.code,
                codesystem=self._system_name(entry.system_uri),
                display=entry.display,
            )
            matched = True
        else:
            name = f"{SENTINEL}_{_slug(concept_term)}"
            decl = ast.CodeDecl(
                name=name,
                code=PLACEHOLDER_CODE,
                codesystem=self._system_name(PLACEHOLDER_SYSTEM_URI),
                display=concept_term,
            )
            matched = False
        self._used_names.add(decl.name)
        self.codes[concept_term] = decl
        return decl.name, matched

    def declarations(self) -> Tuple[Tuple[ast.CodeSystemDecl, ...], Tuple[ast.CodeDecl, ...]]:
        systems = tuple(
            ast.CodeSystemDecl(name=name, system_uri=uri)
            for uri, name in self.systems.items()
        )
        codes = tuple(self.codes[term] for term in self.codes)
        return systems, codes


def _rewrite_codes(expr: ast.Expr, table: _CodeTable) -> Tuple[ast.Expr, List[str]]:
    """Replace concept-term code refs with declared local code names.

    Returns the rewritten expression and the concept terms that had no
    dictionary match.
    """
    unmatched: List[str] = []

    def rewrite(e: ast.Expr) -> ast.Expr:
        if isinstance(e, ast.Exists):
            return ast.Exists(rewrite(e.retrieve))
        if isinstance(e, ast.Retrieve):
            if e.code_ref is None:
                return e
            local, matched = table.resolve(e.code_ref)
            if not matched:
                unmatched.append(e.code_ref)
            return ast.Retrieve(e.resource_type, local, e.where)
        if isinstance(e, ast.And):
            return ast.And(rewrite(e.left), rewrite(e.right))
        if isinstance(e, ast.Or):
            return ast.Or(rewrite(e.left), rewrite(e.right))
        if isinstance(e, ast.Not):
            return ast.Not(rewrite(e.operand))
        if isinstance(e, ast.If):
            return ast.If(rewrite(e.cond), rewrite(e.then), rewrite(e.else_))
        return e

    return rewrite(expr), unmatched


def generate_definitions(ctx: GenerationContext) -> ast.CqlLibrary:
    """One define per non-annotation node, terminology-constrained."""
    diagram = ctx.diagram
    audited_ids = {a.node_id for a in ctx.audit.node_audits}
    diagram_ids = {n.id for n in diagram.nodes}
    if audited_ids != diagram_ids:
        raise ContextMismatchError(
            "audit and diagram disagree on node ids",
            missing=sorted(diagram_ids - audited_ids),
            extra=sorted(audited_ids - diagram_ids),
        )

    ends = set(find_ends(diagram))
    table = _CodeTable(ctx.dictionary)
    defines: List[ast.Define] = []

    for node in diagram.nodes:
        if node.node_type == "annotation":
            continue
        audit = ctx.audit.audit_for(node.id)
        kind = define_kind(node.node_type, node.id in ends)
        name = define_name_for(node.id, kind)

        if kind == "Outcome":
            expr: ast.Expr = ast.StrLit(node.text or node.id)
            comment = None
        elif kind == "Action":
            # actions and process steps gate nothing in the routing conjunction
            expr = ast.BoolLit(True)
            comment = f"gates nothing: {node.node_type}"
        elif audit.computable:
            proposed = parse_expression(audit.proposed_expression)
            expr, unmatched = _rewrite_codes(proposed, table)
            comment = None
            if unmatched:
                terms = ", ".join(sorted(set(unmatched)))
                comment = f"unmapped terminology awaiting human review: {terms}"
        else:
            expr = ast.BoolLit(False)
            categories = sorted({f.category for f in audit.findings})
            if categories:
                comment = (
                    "UNCOMPUTABLE placeholder; governance findings: "
                    + ", ".join(categories)
                )
            else:
                comment = "UNCOMPUTABLE placeholder; no computable pattern matched"

        defines.append(
            ast.Define(
                name=name,
                expression=expr,
                node_binding=node.id,
                leading_comment=comment,
            )
        )

    systems, codes = table.declarations()
    return ast.CqlLibrary(
        name=f"{ctx.library_base_name}Definitions",
        version=ctx.version,
        codesystems=systems,
        codes=codes,
        defines=tuple(defines),
    )


def generate_routing(
    journeys: List[Journey],
    bindings: LibraryBindings,
    diagram: FlowchartDiagram,
) -> ast.CqlLibrary:
    """Journey predicates as conjunctions over bound defines, plus the
    Recommended Action chain."""
    annotations = {n.id for n in diagram.nodes if n.node_type == "annotation"}
    defines: List[ast.Define] = []
    branches: List[Tuple[str, ast.Expr]] = []

    for index, journey in enumerate(journeys, start=1):
        conjuncts: List[ast.Expr] = []
        for node_id in journey.steps[:-1]:
            if node_id in annotations:
                continue
            bound = bindings.node_to_define.get(node_id)
            if bound is None:
                raise MissingBindingError(
                    f"journey {index} references unbound node {node_id!r}"
                )
            conjuncts.append(ast.Ref(bound, alias="Defs"))
        if not conjuncts:
            conjuncts = [ast.BoolLit(True)]
        expr = conjuncts[0]
        for term in conjuncts[1:]:
            expr = ast.And(expr, term)
        journey_name = f"Journey_{index}"
        defines.append(
            ast.Define(
                name=journey_name,
                expression=expr,
                leading_comment="journey: " + " -> ".join(journey.rendered_steps()),
            )
        )
        if journey.loop_terminated:
            outcome: ast.Expr = ast.StrLit(LOOP_ACTION)
        else:
            terminal = journey.steps[-1]
            bound = bindings.node_to_define.get(terminal)
            if bound is not None and bound.endswith("_Outcome"):
                outcome = ast.Ref(bound, alias="Defs")
            else:
                outcome = ast.StrLit(diagram.node(terminal).text or terminal)
        branches.append((journey_name, outcome))

    action: ast.Expr = ast.StrLit(FALLBACK_ACTION)
    for journey_name, outcome in reversed(branches):
        action = ast.If(ast.Ref(journey_name), outcome, action)
    defines.append(ast.Define(name="Recommended Action", expression=action))

    return ast.CqlLibrary(
        name=f"{bindings.library_name}Routing"
        if not bindings.library_name.endswith("Definitions")
        else bindings.library_name[: -len("Definitions")] + "Routing",
        version=bindings.version,
        includes=(
            ast.Include(
                library=bindings.library_name,
                version=bindings.version,
                alias="Defs",
            ),
        ),
        defines=tuple(defines),
    )


# ---------------------------------------------------------------------------
# critic loop


class DeterministicGenerator:
    """Baseline generator; its repair hook applies mechanical fixes only."""

    def generate(self, ctx: GenerationContext) -> ast.CqlLibrary:
        return generate_definitions(ctx)

    def repair(
        self, lib: ast.CqlLibrary, report: CheckReport, ctx: GenerationContext
    ) -> ast.CqlLibrary:
        has_type_errors = any(e.code == "E_TYPE" for e in report.errors)
        hallucinated = {
            e.symbol for e in report.errors if e.code == "E_HALLUCINATED_CODE"
        }

        codes: List[ast.CodeDecl] = []
        renames: Dict[str, str] = {}
        for code in lib.codes:
            if code.name in hallucinated:
                new_name = f"{SENTINEL}_{_slug(code.display or code.name)}"
                renames[code.name] = new_name
                codes.append(
                    ast.CodeDecl(
                        name=new_name,
                        code=PLACEHOLDER_CODE,
                        codesystem=code.codesystem,
                        display=code.display,
                    )
                )
            else:
                codes.append(code)

        defines: List[ast.Define] = []
        seen: set = set()
        for define in lib.defines:
            if define.name in seen:
                continue  # drop duplicates, keep the first
            seen.add(define.name)
            if has_type_errors and _define_type_broken(lib, define):
                defines.append(
                    ast.Define(
                        name=define.name,
                        expression=ast.BoolLit(False),
                        node_binding=define.node_binding,
                        leading_comment="replaced after type error",
                    )
                )
                continue
            expr = define.expression
            if renames:
                expr = _rename_code_refs(expr, renames)
            defines.append(
                ast.Define(
                    name=define.name,
                    expression=expr,
                    node_binding=define.node_binding,
                    leading_comment=define.leading_comment,
                )
            )

        return ast.CqlLibrary(
            name=lib.name,
            version=lib.version,
            using_model=lib.using_model,
            includes=lib.includes,
            codesystems=lib.codesystems,
            codes=tuple(codes),
            defines=tuple(defines),
        )


def _expr_type(expr: ast.Expr, lib: ast.CqlLibrary, stack=frozenset()) -> str:
    if isinstance(expr, ast.BoolLit):
        return "bool"
    if isinstance(expr, ast.StrLit):
        return "str"
    if isinstance(expr, ast.NumLit):
        return "num"
    if isinstance(expr, (ast.Exists, ast.And, ast.Or, ast.Not)):
        return "bool"
    if isinstance(expr, ast.AgeInYears):
        return "bool" if expr.op is not None else "num"
    if isinstance(expr, ast.If):
        t1 = _expr_type(expr.then, lib, stack)
        t2 = _expr_type(expr.else_, lib, stack)
        return t1 if t1 == t2 else "unknown"
    if isinstance(expr, ast.Ref) and expr.alias is None:
        if expr.name in stack:
            return "unknown"
        target = lib.define(expr.name)
        if target is None:
            return "unknown"
        return _expr_type(target.expression, lib, stack | {expr.name})
    return "unknown"


def _define_type_broken(lib: ast.CqlLibrary, define: ast.Define) -> bool:
    """True when the define carries an in-expression type fault the
    mechanical repair should neutralize with a false placeholder."""
    from .cql.checker import NUMERIC_PATHS

    for node in ast.walk(define.expression):
        if isinstance(node, (ast.And, ast.Or)):
            for side in (node.left, node.right):
                if _expr_type(side, lib) not in ("bool", "unknown"):
                    return True
        elif isinstance(node, ast.Not):
            if _expr_type(node.operand, lib) not in ("bool", "unknown"):
                return True
        elif isinstance(node, ast.If):
            if _expr_type(node.cond, lib) not in ("bool", "unknown"):
                return True
        elif isinstance(node, ast.Compare):
            want = "num" if node.path in NUMERIC_PATHS else "str"
            if _expr_type(node.literal, lib) != want:
                return True
    if define.name.startswith("Journey_"):
        if _expr_type(define.expression, lib) not in ("bool", "unknown"):
            return True
    return False


def _rename_code_refs(expr: ast.Expr, renames: Dict[str, str]) -> ast.Expr:
    if isinstance(expr, ast.Exists):
        return ast.Exists(_rename_code_refs(expr.retrieve, renames))
    if isinstance(expr, ast.Retrieve):
        if expr.code_ref in renames:
            return ast.Retrieve(expr.resource_type, renames[expr.code_ref], expr.where)
        return expr
    if isinstance(expr, ast.And):
        return ast.And(
            _rename_code_refs(expr.left, renames),
            _rename_code_refs(expr.right, renames),
        )
    if isinstance(expr, ast.Or):
        return ast.Or(
            _rename_code_refs(expr.left, renames),
            _rename_code_refs(expr.right, renames),
        )
    if isinstance(expr, ast.Not):
        return ast.Not(_rename_code_refs(expr.operand, renames))
    if isinstance(expr, ast.If):
        return ast.If(
            _rename_code_refs(expr.cond, renames),
            _rename_code_refs(expr.then, renames),
            _rename_code_refs(expr.else_, renames),
        )
    return expr


_GENERATORS: Dict[str, object] = {"deterministic": DeterministicGenerator()}


def register_generator(backend: str, generator) -> None:
    _GENERATORS[backend] = generator


def critic_loop(
    ctx: GenerationContext, generator: str = "deterministic"
) -> CriticOutcome:
    """generate -> check -> repair, bounded at three iterations."""
    if generator not in _GENERATORS:
        raise BackendUnknownError(f"unknown generator backend {generator!r}")
    gen = _GENERATORS[generator]
    lib = gen.generate(ctx)
    report = None
    for iteration in range(1, MAX_CRITIC_ITERATIONS + 1):
        report = check_library(lib, [], ctx.dictionary)
        if report.ok:
            return CriticOutcome(
                library=lib, iterations_used=iteration, final_report=report
            )
        if iteration < MAX_CRITIC_ITERATIONS:
            lib = gen.repair(lib, report, ctx)
    outcome = CriticOutcome(
        library=lib, iterations_used=MAX_CRITIC_ITERATIONS, final_report=report
    )
    raise CriticExhaustedError(
        "generated library still fails checks after three iterations", outcome
    )
