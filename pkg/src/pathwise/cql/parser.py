"""Recursive-descent parser for the CQL subset.

Node bindings are recovered from the structured comment convention:
a line comment ``// node: <id>`` immediately preceding a define.
"""

from __future__ import annotations

import re
from typing import List, Optional, Tuple

from ..errors import CqlParseError
from . import ast
from .lexer import Token, tokenize

_NODE_COMMENT = re.compile(r"^//\s*node:\s*(\S+)\s*$")


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0
        self.pending_comments: List[str] = []

    # ------------------------------------------------------------------ utils

    def peek(self, ahead: int = 0) -> Token:
        self._skim_comments()
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def _skim_comments(self) -> None:
        while self.tokens[self.pos].kind == "COMMENT":
            self.pending_comments.append(self.tokens[self.pos].value)
            self.pos += 1

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def fail(self, expected: str, tok: Token):
        raise CqlParseError(
            f"expected {expected}, found {tok.kind} {tok.value!r}", tok.line, tok.col
        )

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            self.fail(value or kind, tok)
        return self.next()

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "KEYWORD" and tok.value == word

    def loc(self, tok: Token) -> ast.Loc:
        return ast.Loc(tok.line, tok.col)

    def take_comments(self) -> Tuple[Optional[str], Optional[str]]:
        """Split pending line comments into (node_binding, leading_comment)."""
        binding = None
        rest: List[str] = []
        for comment in self.pending_comments:
            if not comment.startswith("//"):
                continue  # block comments do not survive round trips
            m = _NODE_COMMENT.match(comment)
            if m and binding is None:
                binding = m.group(1)
            else:
                rest.append(comment[2:].strip())
        self.pending_comments = []
        return binding, ("\n".join(rest) if rest else None)

    # ---------------------------------------------------------------- library

    def library(self) -> ast.CqlLibrary:
        self.expect("KEYWORD", "library")
        name = self.expect("IDENT").value
        self.expect("KEYWORD", "version")
        version = self.expect("STR").value
        self.pending_comments = []

        using_model = "FHIR 4.0.1"
        includes: List[ast.Include] = []
        codesystems: List[ast.CodeSystemDecl] = []
        codes: List[ast.CodeDecl] = []

        while True:
            tok = self.peek()
            if self.at_keyword("using"):
                self.next()
                model = self.expect("IDENT").value
                self.expect("KEYWORD", "version")
                model_version = self.expect("STR").value
                if model != "FHIR":
                    self.fail("FHIR", tok)
                using_model = f"{model} {model_version}"
            elif self.at_keyword("include"):
                self.next()
                lib_name = self.expect("IDENT").value
                self.expect("KEYWORD", "version")
                inc_version = self.expect("STR").value
                self.expect("KEYWORD", "called")
                alias = self.expect("IDENT").value
                includes.append(
                    ast.Include(lib_name, inc_version, alias, loc=self.loc(tok))
                )
            elif self.at_keyword("codesystem"):
                self.next()
                cs_name = self.expect("QNAME").value
                self.expect("PUNCT", ":")
                uri = self.expect("STR").value
                codesystems.append(ast.CodeSystemDecl(cs_name, uri, loc=self.loc(tok)))
            elif self.at_keyword("code"):
                self.next()
                code_name = self.expect("QNAME").value
                self.expect("PUNCT", ":")
                value = self.expect("STR").value
                self.expect("KEYWORD", "from")
                cs_ref = self.expect("QNAME").value
                display = None
                if self.at_keyword("display"):
                    self.next()
                    display = self.expect("STR").value
                codes.append(
                    ast.CodeDecl(code_name, value, cs_ref, display, loc=self.loc(tok))
                )
            else:
                break
            self.pending_comments = []

        defines: List[ast.Define] = []
        while self.at_keyword("define"):
            binding, leading = self.take_comments()
            tok = self.next()
            def_name = self.expect("QNAME").value
            self.expect("PUNCT", ":")
            expr = self.expression()
            defines.append(
                ast.Define(
                    name=def_name,
                    expression=expr,
                    node_binding=binding,
                    leading_comment=leading,
                    loc=self.loc(tok),
                )
            )
        end = self.peek()
        if end.kind != "EOF":
            self.fail("define or end of input", end)
        if not defines:
            self.fail("at least one define", end)
        return ast.CqlLibrary(
            name=name,
            version=version,
            using_model=using_model,
            includes=tuple(includes),
            codesystems=tuple(codesystems),
            codes=tuple(codes),
            defines=tuple(defines),
        )

    # ------------------------------------------------------------- expression

    def expression(self) -> ast.Expr:
        if self.at_keyword("if"):
            tok = self.next()
            cond = self.expression()
            self.expect("KEYWORD", "then")
            then = self.expression()
            self.expect("KEYWORD", "else")
            else_ = self.expression()
            return ast.If(cond, then, else_, loc=self.loc(tok))
        return self.or_expr()

    def or_expr(self) -> ast.Expr:
        left = self.and_expr()
        while self.at_keyword("or"):
            tok = self.next()
            left = ast.Or(left, self.and_expr(), loc=self.loc(tok))
        return left

    def and_expr(self) -> ast.Expr:
        left = self.unary()
        while self.at_keyword("and"):
            tok = self.next()
            left = ast.And(left, self.unary(), loc=self.loc(tok))
        return left

    def unary(self) -> ast.Expr:
        if self.at_keyword("not"):
            tok = self.next()
            return ast.Not(self.unary(), loc=self.loc(tok))
        return self.primary()

    def primary(self) -> ast.Expr:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.value in ("true", "false"):
            self.next()
            return ast.BoolLit(tok.value == "true", loc=self.loc(tok))
        if tok.kind == "STR":
            self.next()
            return ast.StrLit(tok.value, loc=self.loc(tok))
        if tok.kind == "QNAME":
            self.next()
            return ast.Ref(tok.value, loc=self.loc(tok))
        if tok.kind == "KEYWORD" and tok.value == "exists":
            self.next()
            self.expect("PUNCT", "(")
            retrieve = self.retrieve()
            self.expect("PUNCT", ")")
            return ast.Exists(retrieve, loc=self.loc(tok))
        if tok.kind == "PUNCT" and tok.value == "(":
            self.next()
            inner = self.expression()
            self.expect("PUNCT", ")")
            return inner
        if tok.kind == "IDENT" and tok.value == "AgeInYears":
            self.next()
            self.expect("PUNCT", "(")
            self.expect("PUNCT", ")")
            nxt = self.peek()
            if nxt.kind == "OP":
                op = self.next().value
                num = self.expect("NUMBER")
                return ast.AgeInYears(op, float(num.value), loc=self.loc(tok))
            return ast.AgeInYears(loc=self.loc(tok))
        if tok.kind == "IDENT":
            self.next()
            self.expect("PUNCT", ".")
            name = self.expect("QNAME").value
            return ast.Ref(name, alias=tok.value, loc=self.loc(tok))
        self.fail("expression", tok)

    def retrieve(self) -> ast.Retrieve:
        open_tok = self.expect("PUNCT", "[")
        rtype = self.expect("IDENT").value
        if rtype not in ast.RESOURCE_TYPES:
            raise CqlParseError(
                f"unknown resource type {rtype!r}", open_tok.line, open_tok.col
            )
        code_ref = None
        if self.peek().kind == "PUNCT" and self.peek().value == ":":
            self.next()
            code_ref = self.expect("QNAME").value
        self.expect("PUNCT", "]")
        where: List[ast.Compare] = []
        tok = self.peek()
        if tok.kind == "IDENT" and tok.value == "R":
            self.next()
            self.expect("KEYWORD", "where")
            where.append(self.comparison())
            while self.at_keyword("and"):
                self.next()
                where.append(self.comparison())
        return ast.Retrieve(rtype, code_ref, tuple(where), loc=self.loc(open_tok))

    def comparison(self) -> ast.Compare:
        tok = self.expect("IDENT")
        segments = [tok.value]
        while self.peek().kind == "PUNCT" and self.peek().value == ".":
            self.next()
            segments.append(self.expect("IDENT").value)
        if segments[0] == "R":
            segments = segments[1:]
        if not segments:
            self.fail("attribute path", tok)
        path = ".".join(segments)
        op = self.expect("OP").value
        lit_tok = self.peek()
        if lit_tok.kind == "NUMBER":
            self.next()
            literal: ast.Expr = ast.NumLit(float(lit_tok.value), loc=self.loc(lit_tok))
        elif lit_tok.kind == "STR":
            self.next()
            literal = ast.StrLit(lit_tok.value, loc=self.loc(lit_tok))
        elif lit_tok.kind == "KEYWORD" and lit_tok.value in ("true", "false"):
            self.next()
            literal = ast.BoolLit(lit_tok.value == "true", loc=self.loc(lit_tok))
        else:
            self.fail("literal", lit_tok)
        return ast.Compare(path, op, literal, loc=self.loc(tok))


def parse_library(text: str) -> ast.CqlLibrary:
    tokens = tokenize(text, keep_comments=True)
    return _Parser(tokens).library()


def parse_expression(text: str) -> ast.Expr:
    """Parse a bare expression (used for audit-proposed expressions)."""
    tokens = tokenize(text, keep_comments=True)
    parser = _Parser(tokens)
    expr = parser.expression()
    tail = parser.peek()
    if tail.kind != "EOF":
        parser.fail("end of expression", tail)
    return expr
