"""Tokenizer for the CQL subset."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from ..errors import CqlLexError

KEYWORDS = frozenset(
    {
        "library",
        "version",
        "using",
        "include",
        "called",
        "codesystem",
        "code",
        "from",
        "display",
        "define",
        "if",
        "then",
        "else",
        "or",
        "and",
        "not",
        "true",
        "false",
        "exists",
        "where",
    }
)

OPS = ("!=", ">=", "<=", "=", ">", "<")


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD IDENT QNAME STR NUMBER OP PUNCT COMMENT EOF
    value: str
    line: int
    col: int


def tokenize(text: str, keep_comments: bool = False) -> List[Token]:
    tokens: List[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def err(msg: str, l: int, c: int) -> CqlLexError:
        return CqlLexError(msg, l, c)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        start_line, start_col = line, col
        if text.startswith("//", i):
            j = text.find("\n", i)
            if j == -1:
                j = n
            if keep_comments:
                tokens.append(Token("COMMENT", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j == -1:
                raise err("unterminated block comment", start_line, start_col)
            body = text[i : j + 2]
            if keep_comments:
                tokens.append(Token("COMMENT", body, start_line, start_col))
            newlines = body.count("\n")
            if newlines:
                line += newlines
                col = len(body) - body.rfind("\n")
            else:
                col += len(body)
            i = j + 2
            continue
        if ch == "'":
            j = i + 1
            while j < n and text[j] not in "'\n":
                j += 1
            if j >= n or text[j] != "'":
                raise err("unterminated string literal", start_line, start_col)
            tokens.append(Token("STR", text[i + 1 : j], start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] != '"':
                raise err("unterminated quoted identifier", start_line, start_col)
            tokens.append(Token("QNAME", text[i + 1 : j], start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            lit = text[i:j]
            if lit.count(".") > 1:
                raise err(f"malformed number {lit!r}", start_line, start_col)
            tokens.append(Token("NUMBER", lit, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "KEYWORD" if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, start_line, start_col))
            col += j - i
            i = j
            continue
        matched_op: Optional[str] = None
        for op in OPS:
            if text.startswith(op, i):
                matched_op = op
                break
        if matched_op:
            tokens.append(Token("OP", matched_op, start_line, start_col))
            col += len(matched_op)
            i += len(matched_op)
            continue
        if ch in ":.()[]":
            tokens.append(Token("PUNCT", ch, start_line, start_col))
            col += 1
            i += 1
            continue
        raise err(f"illegal character {ch!r}", start_line, start_col)

    tokens.append(Token("EOF", "", line, col))
    return tokens
