"""Deterministic semantic checker: the compiler-as-critic.

A clean report guarantees: unique names, resolved references, whitelisted
attribute paths, boolean routing logic, and no terminology code outside
the approved dictionary unless it carries the human-mapping sentinel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..errors import DupBindingError
from ..terminology import TerminologyDictionary
from . import ast

SENTINEL = "REQUIRES_HUMAN_MAPPING"

# Supported attribute paths per resource type; anything else is E_BAD_PATH.
PATH_WHITELIST: Dict[str, Tuple[str, ...]] = {
    "Patient": ("birthDate", "gender"),
    "Condition": ("code", "onsetDateTime", "clinicalStatus"),
    "Observation": ("code", "value.value", "value.unit", "effectiveDateTime"),
    "Procedure": ("code", "performedDateTime"),
    "ServiceRequest": ("code", "authoredOn"),
}

NUMERIC_PATHS = frozenset({"value.value"})
DATE_PATHS = frozenset(
    {
        "birthDate",
        "onsetDateTime",
        "effectiveDateTime",
        "performedDateTime",
        "authoredOn",
    }
)


@dataclass(frozen=True)
class CheckIssue:
    code: str
    message: str
    location: str  # "line:col"
    symbol: str


@dataclass(frozen=True)
class CheckReport:
    ok: bool
    errors: Tuple[CheckIssue, ...] = ()
    warnings: Tuple[CheckIssue, ...] = ()

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "errors": [vars(e) for e in self.errors],
            "warnings": [vars(w) for w in self.warnings],
        }


@dataclass(frozen=True)
class LibraryBindings:
    library_name: str
    version: str
    node_to_define: Dict[str, str] = field(default_factory=dict)


def _loc(loc: ast.Loc) -> str:
    return f"{loc.line}:{loc.col}"


class _Checker:
    def __init__(
        self,
        lib: ast.CqlLibrary,
        deps: List[ast.CqlLibrary],
        dictionary: TerminologyDictionary,
    ):
        self.lib = lib
        self.deps = {d.name: d for d in deps}
        self.dictionary = dictionary
        self.found: List[Tuple[int, int, int, CheckIssue]] = []
        self.warnings: List[Tuple[int, int, int, CheckIssue]] = []

    def issue(self, index: int, code: str, message: str, loc: ast.Loc, symbol: str):
        self.found.append(
            (index, loc.line, loc.col, CheckIssue(code, message, _loc(loc), symbol))
        )

    def warn(self, index: int, code: str, message: str, loc: ast.Loc, symbol: str):
        self.warnings.append(
            (index, loc.line, loc.col, CheckIssue(code, message, _loc(loc), symbol))
        )

    # ----------------------------------------------------------------- checks

    def check_duplicates(self):
        seen = set()
        for define in self.lib.defines:
            if define.name in seen:
                self.issue(
                    1,
                    "E_DUP_DEFINE",
                    f"duplicate define {define.name!r}",
                    define.loc,
                    define.name,
                )
            seen.add(define.name)
        seen_codes = set()
        for code in self.lib.codes:
            if code.name in seen_codes:
                self.issue(
                    1,
                    "E_DUP_DEFINE",
                    f"duplicate code name {code.name!r}",
                    code.loc,
                    code.name,
                )
            seen_codes.add(code.name)

    def _aliased_define(self, alias: str, name: str) -> Optional[ast.Define]:
        for inc in self.lib.includes:
            if inc.alias == alias:
                dep = self.deps.get(inc.library)
                if dep is None or dep.version != inc.version:
                    return None
                return dep.define(name)
        return None

    def check_references(self):
        local = {d.name for d in self.lib.defines}
        aliases = {inc.alias: inc for inc in self.lib.includes}
        declared_codes = {c.name for c in self.lib.codes}
        for define in self.lib.defines:
            for node in ast.walk(define.expression):
                if isinstance(node, ast.Retrieve):
                    if node.code_ref is not None and node.code_ref not in declared_codes:
                        self.issue(
                            2,
                            "E_UNDEFINED_IDENT",
                            f"retrieve references undeclared code {node.code_ref!r}",
                            node.loc,
                            node.code_ref,
                        )
                    continue
                if not isinstance(node, ast.Ref):
                    continue
                if node.alias is None:
                    if node.name not in local:
                        self.issue(
                            2,
                            "E_UNDEFINED_IDENT",
                            f"reference to undefined {node.name!r}",
                            node.loc,
                            node.name,
                        )
                    continue
                inc = aliases.get(node.alias)
                if inc is None:
                    self.issue(
                        3,
                        "E_UNKNOWN_INCLUDE",
                        f"alias {node.alias!r} has no matching include",
                        node.loc,
                        node.alias,
                    )
                    continue
                dep = self.deps.get(inc.library)
                if dep is None or dep.version != inc.version:
                    continue  # reported once per include below
                if dep.define(node.name) is None:
                    self.issue(
                        2,
                        "E_UNDEFINED_IDENT",
                        f"{inc.library} has no define {node.name!r}",
                        node.loc,
                        node.name,
                    )

    def check_includes(self):
        for inc in self.lib.includes:
            dep = self.deps.get(inc.library)
            if dep is None or dep.version != inc.version:
                self.issue(
                    3,
                    "E_UNKNOWN_INCLUDE",
                    f"include {inc.library} version {inc.version!r} not supplied",
                    inc.loc,
                    inc.library,
                )

    def check_codesystems(self):
        declared = {cs.name for cs in self.lib.codesystems}
        for code in self.lib.codes:
            if code.codesystem not in declared:
                self.issue(
                    4,
                    "E_UNKNOWN_CODESYSTEM",
                    f"code {code.name!r} references undeclared codesystem "
                    f"{code.codesystem!r}",
                    code.loc,
                    code.codesystem,
                )

    def check_paths(self):
        for define in self.lib.defines:
            for node in ast.walk(define.expression):
                if not isinstance(node, ast.Retrieve):
                    continue
                allowed = PATH_WHITELIST.get(node.resource_type, ())
                for cmp_ in node.where:
                    if cmp_.path not in allowed:
                        self.issue(
                            5,
                            "E_BAD_PATH",
                            f"path {cmp_.path!r} not supported on "
                            f"{node.resource_type}",
                            cmp_.loc,
                            cmp_.path,
                        )

    # ------------------------------------------------------------------ types

    def _type_of(self, expr: ast.Expr, stack: frozenset) -> str:
        if isinstance(expr, ast.BoolLit):
            return "bool"
        if isinstance(expr, ast.StrLit):
            return "str"
        if isinstance(expr, ast.NumLit):
            return "num"
        if isinstance(expr, (ast.Exists,)):
            return "bool"
        if isinstance(expr, ast.AgeInYears):
            return "bool" if expr.op is not None else "num"
        if isinstance(expr, (ast.And, ast.Or, ast.Not)):
            return "bool"
        if isinstance(expr, ast.If):
            then_t = self._type_of(expr.then, stack)
            else_t = self._type_of(expr.else_, stack)
            return then_t if then_t == else_t else "unknown"
        if isinstance(expr, ast.Ref):
            if expr.alias is None:
                if expr.name in stack:
                    return "unknown"
                target = self.lib.define(expr.name)
                if target is None:
                    return "unknown"
                return self._type_of(target.expression, stack | {expr.name})
            target = self._aliased_define(expr.alias, expr.name)
            if target is None:
                return "unknown"
            return self._type_of(target.expression, stack)
        return "unknown"

    def _require_bool(self, expr: ast.Expr, context: str):
        t = self._type_of(expr, frozenset())
        if t not in ("bool", "unknown"):
            loc = getattr(expr, "loc", ast.Loc())
            self.issue(
                6,
                "E_TYPE",
                f"{context} must be boolean, got {t}",
                loc,
                context,
            )

    def check_types(self):
        for define in self.lib.defines:
            for node in ast.walk(define.expression):
                if isinstance(node, (ast.And, ast.Or)):
                    self._require_bool(node.left, "operand of and/or")
                    self._require_bool(node.right, "operand of and/or")
                elif isinstance(node, ast.Not):
                    self._require_bool(node.operand, "operand of not")
                elif isinstance(node, ast.If):
                    self._require_bool(node.cond, "if condition")
                elif isinstance(node, ast.Compare):
                    lit_t = self._type_of(node.literal, frozenset())
                    want = "num" if node.path in NUMERIC_PATHS else "str"
                    if lit_t != want:
                        self.issue(
                            6,
                            "E_TYPE",
                            f"comparison on {node.path!r} requires {want} literal",
                            node.loc,
                            node.path,
                        )
            if define.name.startswith("Journey_"):
                self._require_bool(define.expression, f"journey define {define.name}")
            if define.name == "Recommended Action":
                self._check_action_branches(define.expression)

    def _check_action_branches(self, expr: ast.Expr):
        if isinstance(expr, ast.If):
            self._check_action_branches(expr.then)
            self._check_action_branches(expr.else_)
            return
        t = self._type_of(expr, frozenset())
        if t not in ("str", "unknown"):
            loc = getattr(expr, "loc", ast.Loc())
            self.issue(
                6,
                "E_TYPE",
                f"Recommended Action branch must be a string, got {t}",
                loc,
                "Recommended Action",
            )

    # ------------------------------------------------------------ terminology

    def check_codes(self):
        systems = {cs.name: cs.system_uri for cs in self.lib.codesystems}
        for code in self.lib.codes:
            uri = systems.get(code.codesystem)
            if uri is None:
                continue  # already E_UNKNOWN_CODESYSTEM
            if SENTINEL in code.name:
                self.warn(
                    7,
                    "W_HUMAN_MAPPING",
                    f"code {code.name!r} awaits human terminology mapping",
                    code.loc,
                    code.name,
                )
                continue
            if not self.dictionary.contains_pair(uri, code.code):
                self.issue(
                    7,
                    "E_HALLUCINATED_CODE",
                    f"code pair ({uri!r}, {code.code!r}) is not in the approved "
                    "dictionary",
                    code.loc,
                    code.name,
                )

    def run(self) -> CheckReport:
        self.check_duplicates()
        self.check_references()
        self.check_includes()
        self.check_codesystems()
        self.check_paths()
        self.check_types()
        self.check_codes()
        self.found.sort(key=lambda item: item[:3])
        self.warnings.sort(key=lambda item: item[:3])
        errors = tuple(item[3] for item in self.found)
        warnings = tuple(item[3] for item in self.warnings)
        return CheckReport(ok=not errors, errors=errors, warnings=warnings)


def check_library(
    lib: ast.CqlLibrary,
    deps: List[ast.CqlLibrary],
    dictionary: TerminologyDictionary,
) -> CheckReport:
    return _Checker(lib, deps, dictionary).run()


def extract_bindings(lib: ast.CqlLibrary) -> LibraryBindings:
    """Recover the node-id-to-define map from structured comments."""
    mapping: Dict[str, str] = {}
    for define in lib.defines:
        if define.node_binding is None:
            continue
        if define.node_binding in mapping:
            raise DupBindingError(
                f"node {define.node_binding!r} bound by both "
                f"{mapping[define.node_binding]!r} and {define.name!r}"
            )
        mapping[define.node_binding] = define.name
    return LibraryBindings(
        library_name=lib.name, version=lib.version, node_to_define=mapping
    )
