"""Approved terminology dictionary: the anti-hallucination constraint.

Matching is exact on the normalized concept term; anything approximate
would be an unverifiable clinical claim, so unmatched terms surface as
``REQUIRES_HUMAN_MAPPING`` instead.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Set, Tuple

from .errors import DictDuplicateError, DictFormatError

SENTINEL = "REQUIRES_HUMAN_MAPPING"

_HEADER = ["concept_term", "system_uri", "code", "display"]

_WS = re.compile(r"\s+")


def normalize_term(term: str) -> str:
    return _WS.sub(" ", term.strip()).lower()


@dataclass(frozen=True)
class TerminologyEntry:
    concept_term: str  # normalized key
    system_uri: str
    code: str
    display: str


@dataclass(frozen=True)
class MatchResult:
    status: str  # "matched" | "unmatched"
    entry: Optional[TerminologyEntry] = None
    sentinel: Optional[str] = None

    @property
    def matched(self) -> bool:
        return self.status == "matched"


@dataclass(frozen=True)
class TerminologyDictionary:
    entries: Dict[str, TerminologyEntry]
    source_path: str = "<memory>"
    _pairs: Set[Tuple[str, str]] = field(default_factory=set, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_pairs", {(e.system_uri, e.code) for e in self.entries.values()}
        )

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, term: str) -> MatchResult:
        entry = self.entries.get(normalize_term(term))
        if entry is None:
            return MatchResult(status="unmatched", sentinel=SENTINEL)
        return MatchResult(status="matched", entry=entry)

    def contains_pair(self, system_uri: str, code: str) -> bool:
        # byte-exact on both components
        return (system_uri, code) in self._pairs


def empty_dictionary() -> TerminologyDictionary:
    return TerminologyDictionary(entries={}, source_path="<empty>")


def parse_dictionary(text: str, source_path: str = "<memory>") -> TerminologyDictionary:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        return TerminologyDictionary(entries={}, source_path=source_path)
    if rows[0] != _HEADER:
        raise DictFormatError(
            f"header must be {','.join(_HEADER)!r}", line=1
        )
    entries: Dict[str, TerminologyEntry] = {}
    pairs: Set[Tuple[str, str]] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise DictFormatError(
                f"expected 4 columns, found {len(row)}", line=lineno
            )
        term = normalize_term(row[0])
        if not term:
            raise DictFormatError("empty concept_term", line=lineno)
        if not row[1].strip() or not row[2].strip():
            raise DictFormatError("system_uri and code must be non-empty", line=lineno)
        entry = TerminologyEntry(
            concept_term=term,
            system_uri=row[1],
            code=row[2],
            display=row[3],
        )
        if term in entries:
            raise DictDuplicateError(
                f"duplicate concept_term {term!r}", line=lineno
            )
        pair = (entry.system_uri, entry.code)
        if pair in pairs:
            raise DictDuplicateError(
                f"duplicate (system_uri, code) pair {pair!r}", line=lineno
            )
        entries[term] = entry
        pairs.add(pair)
    return TerminologyDictionary(entries=entries, source_path=source_path)


def load_dictionary(path) -> TerminologyDictionary:
    path = Path(path)
    return parse_dictionary(path.read_text(encoding="utf-8"), source_path=str(path))
