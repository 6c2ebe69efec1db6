"""Minimal FHIR-R4-shaped patient model and CQL-subset interpreter.

Missing optional fields make comparisons false (three-valued logic is
collapsed conservatively), and ``as_of`` is always an explicit parameter
so evaluations are reproducible.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .cql import ast
from .cql.checker import SENTINEL
from .errors import BundleError, EvalTypeError

SUPPORTED_RESOURCES = ("Patient", "Condition", "Observation", "Procedure", "ServiceRequest")


@dataclass(frozen=True)
class CodedResource:
    system_uri: str
    code: str
    value: Optional[float] = None
    unit: Optional[str] = None
    date: Optional[str] = None  # onset/effective/performed/authored, ISO


@dataclass(frozen=True)
class PatientRecord:
    birth_date: Optional[str] = None
    gender: Optional[str] = None
    conditions: Tuple[CodedResource, ...] = ()
    observations: Tuple[CodedResource, ...] = ()
    procedures: Tuple[CodedResource, ...] = ()
    service_requests: Tuple[CodedResource, ...] = ()
    skipped_resources: int = 0

    def resources(self, resource_type: str) -> Tuple[CodedResource, ...]:
        return {
            "Condition": self.conditions,
            "Observation": self.observations,
            "Procedure": self.procedures,
            "ServiceRequest": self.service_requests,
        }.get(resource_type, ())


@dataclass(frozen=True)
class ReviewFlag:
    node_id: str
    reason: str  # uncomputable_placeholder | unmapped_terminology

    def to_dict(self) -> dict:
        return {"node_id": self.node_id, "reason": self.reason}


@dataclass(frozen=True)
class EvaluationResult:
    recommended_action: str
    matched_journey: Optional[str]
    journey_values: Dict[str, bool]
    review_flags: Tuple[ReviewFlag, ...]
    as_of: dt.date


def _parse_date(text: str) -> Optional[dt.date]:
    try:
        return dt.date.fromisoformat(text[:10])
    except (ValueError, TypeError):
        return None


_DATE_FIELDS = {
    "Condition": "onsetDateTime",
    "Observation": "effectiveDateTime",
    "Procedure": "performedDateTime",
    "ServiceRequest": "authoredOn",
}


def _coding(resource: dict, rtype: str) -> Tuple[str, str]:
    code = resource.get("code")
    if not isinstance(code, dict):
        raise BundleError(f"{rtype} resource missing code")
    codings = code.get("coding")
    if not isinstance(codings, list) or not codings:
        raise BundleError(f"{rtype} resource has no code.coding")
    first = codings[0]
    system = first.get("system")
    value = first.get("code")
    if not isinstance(system, str) or not isinstance(value, str):
        raise BundleError(f"{rtype} coding missing system or code")
    return system, value


def load_bundle(text: str) -> PatientRecord:
    """Map a FHIR Bundle onto the minimal record; unsupported resource
    types are skipped with a warning count."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleError(f"not parseable as JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("resourceType") != "Bundle":
        raise BundleError("document is not a FHIR Bundle")

    birth_date = None
    gender = None
    buckets: Dict[str, List[CodedResource]] = {
        "Condition": [],
        "Observation": [],
        "Procedure": [],
        "ServiceRequest": [],
    }
    skipped = 0
    for entry in doc.get("entry", []) or []:
        resource = entry.get("resource") if isinstance(entry, dict) else None
        if not isinstance(resource, dict):
            continue
        rtype = resource.get("resourceType")
        if rtype == "Patient":
            birth_date = resource.get("birthDate")
            gender = resource.get("gender")
            continue
        if rtype not in buckets:
            skipped += 1
            continue
        system, code = _coding(resource, rtype)
        value = None
        unit = None
        quantity = resource.get("valueQuantity")
        if isinstance(quantity, dict):
            raw = quantity.get("value")
            if isinstance(raw, (int, float)) and not isinstance(raw, bool):
                value = float(raw)
            raw_unit = quantity.get("unit")
            if isinstance(raw_unit, str):
                unit = raw_unit
        date = resource.get(_DATE_FIELDS[rtype])
        if date is not None and not isinstance(date, str):
            raise BundleError(f"{rtype}.{_DATE_FIELDS[rtype]} must be a string")
        buckets[rtype].append(
            CodedResource(system_uri=system, code=code, value=value, unit=unit, date=date)
        )

    return PatientRecord(
        birth_date=birth_date,
        gender=gender,
        conditions=tuple(buckets["Condition"]),
        observations=tuple(buckets["Observation"]),
        procedures=tuple(buckets["Procedure"]),
        service_requests=tuple(buckets["ServiceRequest"]),
        skipped_resources=skipped,
    )


def age_in_years(birth_date: str, as_of: dt.date) -> Optional[int]:
    born = _parse_date(birth_date) if birth_date else None
    if born is None:
        return None
    years = as_of.year - born.year
    if (as_of.month, as_of.day) < (born.month, born.day):
        years -= 1
    return years


_OPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class _Evaluator:
    def __init__(
        self,
        defs: ast.CqlLibrary,
        routing: ast.CqlLibrary,
        record: PatientRecord,
        as_of: dt.date,
        memoize: bool = True,
    ):
        self.libraries = {"defs": defs, "routing": routing}
        self.record = record
        self.as_of = as_of
        self.memoize = memoize
        self.memo: Dict[Tuple[str, str], object] = {}
        self.evaluated: List[Tuple[str, str]] = []  # (library key, define name)

    def _lib_for_alias(self, current: str, alias: Optional[str]) -> str:
        if alias is None:
            return current
        lib = self.libraries[current]
        for inc in lib.includes:
            if inc.alias == alias:
                return "defs"
        raise EvalTypeError(f"unresolvable alias {alias!r}")

    def eval_define(self, lib_key: str, name: str):
        key = (lib_key, name)
        if self.memoize and key in self.memo:
            return self.memo[key]
        lib = self.libraries[lib_key]
        define = lib.define(name)
        if define is None:
            raise EvalTypeError(f"undefined {name!r} in {lib.name}")
        self.evaluated.append(key)
        value = self.eval_expr(define.expression, lib_key)
        if self.memoize:
            self.memo[key] = value
        return value

    def eval_expr(self, expr: ast.Expr, lib_key: str):
        if isinstance(expr, ast.BoolLit):
            return expr.value
        if isinstance(expr, ast.StrLit):
            return expr.value
        if isinstance(expr, ast.NumLit):
            return expr.value
        if isinstance(expr, ast.Ref):
            return self.eval_define(self._lib_for_alias(lib_key, expr.alias), expr.name)
        if isinstance(expr, ast.And):
            return self._as_bool(expr.left, lib_key) and self._as_bool(
                expr.right, lib_key
            )
        if isinstance(expr, ast.Or):
            return self._as_bool(expr.left, lib_key) or self._as_bool(
                expr.right, lib_key
            )
        if isinstance(expr, ast.Not):
            return not self._as_bool(expr.operand, lib_key)
        if isinstance(expr, ast.If):
            if self._as_bool(expr.cond, lib_key):
                return self.eval_expr(expr.then, lib_key)
            return self.eval_expr(expr.else_, lib_key)
        if isinstance(expr, ast.Exists):
            return len(self._retrieve(expr.retrieve, lib_key)) > 0
        if isinstance(expr, ast.AgeInYears):
            age = age_in_years(self.record.birth_date, self.as_of)
            if expr.op is None:
                return age
            if age is None:
                return False  # missing birthDate: conservative false
            return _OPS[expr.op](age, expr.value)
        raise EvalTypeError(f"unevaluable expression {expr!r}")

    def _as_bool(self, expr: ast.Expr, lib_key: str) -> bool:
        value = self.eval_expr(expr, lib_key)
        if not isinstance(value, bool):
            raise EvalTypeError(f"expected boolean, got {value!r}")
        return value

    def _retrieve(self, retrieve: ast.Retrieve, lib_key: str) -> List[CodedResource]:
        lib = self.libraries[lib_key]
        if retrieve.resource_type == "Patient":
            return self._patient_retrieve(retrieve)
        resources = list(self.record.resources(retrieve.resource_type))
        if retrieve.code_ref is not None:
            decl = lib.code(retrieve.code_ref)
            if decl is None:
                raise EvalTypeError(f"undeclared code {retrieve.code_ref!r}")
            system = lib.codesystem(decl.codesystem)
            if system is None:
                raise EvalTypeError(f"undeclared codesystem {decl.codesystem!r}")
            resources = [
                r
                for r in resources
                if r.system_uri == system.system_uri and r.code == decl.code
            ]
        for cmp_ in retrieve.where:
            resources = [
                r for r in resources if self._matches(r, retrieve.resource_type, cmp_)
            ]
        return resources

    def _patient_retrieve(self, retrieve: ast.Retrieve) -> List[CodedResource]:
        # the patient is modelled as a single pseudo-resource
        patient = CodedResource(system_uri="", code="")
        for cmp_ in retrieve.where:
            if not self._matches_patient(cmp_):
                return []
        return [patient]

    def _matches_patient(self, cmp_: ast.Compare) -> bool:
        if cmp_.path == "birthDate":
            return self._compare_dates(self.record.birth_date, cmp_)
        if cmp_.path == "gender":
            if self.record.gender is None or not isinstance(cmp_.literal, ast.StrLit):
                return False
            return _OPS[cmp_.op](self.record.gender, cmp_.literal.value)
        return False

    def _matches(
        self, resource: CodedResource, rtype: str, cmp_: ast.Compare
    ) -> bool:
        if cmp_.path == "value.value":
            if resource.value is None or not isinstance(cmp_.literal, ast.NumLit):
                return False
            return _OPS[cmp_.op](resource.value, cmp_.literal.value)
        if cmp_.path == "value.unit":
            if resource.unit is None or not isinstance(cmp_.literal, ast.StrLit):
                return False
            return _OPS[cmp_.op](resource.unit, cmp_.literal.value)
        if cmp_.path == "code":
            if not isinstance(cmp_.literal, ast.StrLit):
                return False
            return _OPS[cmp_.op](resource.code, cmp_.literal.value)
        if cmp_.path == _DATE_FIELDS.get(rtype):
            return self._compare_dates(resource.date, cmp_)
        if cmp_.path == "clinicalStatus":
            return False  # not carried in the minimal record
        return False

    def _compare_dates(self, raw: Optional[str], cmp_: ast.Compare) -> bool:
        if raw is None or not isinstance(cmp_.literal, ast.StrLit):
            return False
        left = _parse_date(raw)
        right = _parse_date(cmp_.literal.value)
        if left is None or right is None:
            return False
        return _OPS[cmp_.op](left, right)


def evaluate(
    defs: ast.CqlLibrary,
    routing: ast.CqlLibrary,
    record: PatientRecord,
    as_of: dt.date,
    memoize: bool = True,
) -> EvaluationResult:
    """Evaluate the routing library's Recommended Action over a record."""
    evaluator = _Evaluator(defs, routing, record, as_of, memoize=memoize)
    action = evaluator.eval_define("routing", "Recommended Action")
    if not isinstance(action, str):
        raise EvalTypeError(f"Recommended Action produced {action!r}")

    journey_values: Dict[str, bool] = {}
    matched: Optional[str] = None
    for lib_key, name in evaluator.evaluated:
        if lib_key == "routing" and name.startswith("Journey_"):
            value = evaluator.memo.get((lib_key, name)) if memoize else None
            if value is None:
                # memoization disabled: re-evaluate for the report
                value = _Evaluator(defs, routing, record, as_of).eval_define(
                    "routing", name
                )
            journey_values[name] = bool(value)
            if matched is None and value is True:
                matched = name

    flags: List[ReviewFlag] = []
    seen_flags = set()

    # uncomputable placeholders on any journey evaluated along the chain
    for journey_name in journey_values:
        journey_def = routing.define(journey_name)
        for node in ast.walk(journey_def.expression):
            if isinstance(node, ast.Ref) and node.alias is not None:
                target = defs.define(node.name)
                if (
                    target is not None
                    and target.expression == ast.BoolLit(False)
                    and target.node_binding is not None
                ):
                    key = (target.node_binding, "uncomputable_placeholder")
                    if key not in seen_flags:
                        seen_flags.add(key)
                        flags.append(ReviewFlag(*key))

    # sentinel terminology referenced by any evaluated define
    for lib_key, name in evaluator.evaluated:
        lib = evaluator.libraries[lib_key]
        define = lib.define(name)
        for node in ast.walk(define.expression):
            if isinstance(node, ast.Retrieve) and node.code_ref and SENTINEL in node.code_ref:
                node_id = define.node_binding or name
                key = (node_id, "unmapped_terminology")
                if key not in seen_flags:
                    seen_flags.add(key)
                    flags.append(ReviewFlag(*key))

    return EvaluationResult(
        recommended_action=action,
        matched_journey=matched,
        journey_values=journey_values,
        review_flags=tuple(flags),
        as_of=as_of,
    )
