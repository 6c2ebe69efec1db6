"""AST for the CQL subset.

Source locations are carried for diagnostics but excluded from equality,
so pretty-print/ re-parse round trips compare structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

RESOURCE_TYPES = ("Patient", "Condition", "Observation", "Procedure", "ServiceRequest")

COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Loc:
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class StrLit(Expr):
    value: str
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class NumLit(Expr):
    value: float
    loc: Loc = field(default_factory=Loc, compare=False)

    def render(self) -> str:
        if self.value == int(self.value):
            return str(int(self.value))
        return repr(self.value)


@dataclass(frozen=True)
class Ref(Expr):
    name: str
    alias: Optional[str] = None  # include alias for cross-library references
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class Or(Expr):
    left: Expr
    right: Expr
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class Compare(Expr):
    path: str
    op: str
    literal: Expr  # StrLit | NumLit | BoolLit
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class Retrieve(Expr):
    resource_type: str
    code_ref: Optional[str] = None  # local code name (quoted identifier)
    where: Tuple[Compare, ...] = ()
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class Exists(Expr):
    retrieve: Retrieve
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    else_: Expr
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class AgeInYears(Expr):
    """Bare ``AgeInYears()`` is numeric; with op/value it is a boolean test."""

    op: Optional[str] = None
    value: Optional[float] = None
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class Include:
    library: str
    version: str
    alias: str
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class CodeSystemDecl:
    name: str
    system_uri: str
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class CodeDecl:
    name: str
    code: str
    codesystem: str
    display: Optional[str] = None
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class Define:
    name: str
    expression: Expr
    node_binding: Optional[str] = None
    leading_comment: Optional[str] = None
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass(frozen=True)
class CqlLibrary:
    name: str
    version: str
    using_model: str = "FHIR 4.0.1"
    includes: Tuple[Include, ...] = ()
    codesystems: Tuple[CodeSystemDecl, ...] = ()
    codes: Tuple[CodeDecl, ...] = ()
    defines: Tuple[Define, ...] = ()

    def define(self, name: str) -> Optional[Define]:
        for d in self.defines:
            if d.name == name:
                return d
        return None

    def code(self, name: str) -> Optional[CodeDecl]:
        for c in self.codes:
            if c.name == name:
                return c
        return None

    def codesystem(self, name: str) -> Optional[CodeSystemDecl]:
        for cs in self.codesystems:
            if cs.name == name:
                return cs
        return None


def walk(expr: Expr):
    """Yield every node of an expression tree (pre-order)."""
    yield expr
    if isinstance(expr, (And, Or)):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, Not):
        yield from walk(expr.operand)
    elif isinstance(expr, If):
        yield from walk(expr.cond)
        yield from walk(expr.then)
        yield from walk(expr.else_)
    elif isinstance(expr, Exists):
        yield from walk(expr.retrieve)
    elif isinstance(expr, Retrieve):
        for cmp_ in expr.where:
            yield cmp_
