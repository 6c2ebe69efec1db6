"""Canonical pretty-printer; ``parse(print(lib))`` is the identity on ASTs."""

from __future__ import annotations

from . import ast

# precedence: if < or < and < unary < primary
_IF, _OR, _AND, _UNARY, _PRIMARY = 0, 1, 2, 3, 4


def _level(expr: ast.Expr) -> int:
    if isinstance(expr, ast.If):
        return _IF
    if isinstance(expr, ast.Or):
        return _OR
    if isinstance(expr, ast.And):
        return _AND
    if isinstance(expr, ast.Not):
        return _UNARY
    return _PRIMARY


def _fmt(expr: ast.Expr, min_level: int) -> str:
    text = _fmt_raw(expr)
    if _level(expr) < min_level:
        return f"({text})"
    return text


def _fmt_raw(expr: ast.Expr) -> str:
    if isinstance(expr, ast.BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, ast.StrLit):
        return f"'{expr.value}'"
    if isinstance(expr, ast.NumLit):
        return expr.render()
    if isinstance(expr, ast.Ref):
        if expr.alias:
            return f'{expr.alias}."{expr.name}"'
        return f'"{expr.name}"'
    if isinstance(expr, ast.And):
        return f"{_fmt(expr.left, _AND)} and {_fmt(expr.right, _UNARY)}"
    if isinstance(expr, ast.Or):
        return f"{_fmt(expr.left, _OR)} or {_fmt(expr.right, _AND)}"
    if isinstance(expr, ast.Not):
        return f"not {_fmt(expr.operand, _UNARY)}"
    if isinstance(expr, ast.If):
        return (
            f"if {_fmt(expr.cond, _OR)} "
            f"then {_fmt(expr.then, _OR)} "
            f"else {_fmt(expr.else_, _IF)}"
        )
    if isinstance(expr, ast.Exists):
        return f"exists({_fmt_raw(expr.retrieve)})"
    if isinstance(expr, ast.Retrieve):
        head = f"[{expr.resource_type}"
        if expr.code_ref is not None:
            head += f': "{expr.code_ref}"'
        head += "]"
        if expr.where:
            clauses = " and ".join(_fmt_compare(c) for c in expr.where)
            head += f" R where {clauses}"
        return head
    if isinstance(expr, ast.AgeInYears):
        if expr.op is not None:
            return f"AgeInYears() {expr.op} {ast.NumLit(expr.value).render()}"
        return "AgeInYears()"
    raise TypeError(f"unprintable expression {expr!r}")


def _fmt_compare(cmp_: ast.Compare) -> str:
    return f"R.{cmp_.path} {cmp_.op} {_fmt_raw(cmp_.literal)}"


def print_expression(expr: ast.Expr) -> str:
    return _fmt(expr, _IF)


def print_library(lib: ast.CqlLibrary) -> str:
    lines = [f"library {lib.name} version '{lib.version}'", ""]
    model, _, model_version = lib.using_model.partition(" ")
    lines.append(f"using {model} version '{model_version}'")
    lines.append("")
    for inc in lib.includes:
        lines.append(
            f"include {inc.library} version '{inc.version}' called {inc.alias}"
        )
    if lib.includes:
        lines.append("")
    for cs in lib.codesystems:
        lines.append(f'codesystem "{cs.name}": \'{cs.system_uri}\'')
    if lib.codesystems:
        lines.append("")
    for code in lib.codes:
        decl = f'code "{code.name}": \'{code.code}\' from "{code.codesystem}"'
        if code.display is not None:
            decl += f" display '{code.display}'"
        lines.append(decl)
    if lib.codes:
        lines.append("")
    for define in lib.defines:
        if define.node_binding is not None:
            lines.append(f"// node: {define.node_binding}")
        if define.leading_comment:
            for comment_line in define.leading_comment.split("\n"):
                lines.append(f"// {comment_line}")
        lines.append(f'define "{define.name}": {print_expression(define.expression)}')
        lines.append("")
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines) + "\n"
