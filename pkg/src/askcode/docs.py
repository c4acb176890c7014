"""Construct catalog: existence validation, keyword search, targeted retrieval."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import gateway
from .errors import DuplicateConstruct, ParseError
from .llm import Session
from .model import Diagnostic, Stage

_CAMEL = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|[0-9]+")
_WORD = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class ConstructDoc:
    qualified_name: str
    kind: str  # "class" or "predicate"
    doc: str
    members: tuple[str, ...] = ()
    parent: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("class", "predicate"):
            raise ValueError(f"unknown construct kind {self.kind!r}")
        if self.kind == "predicate" and not self.parent:
            raise ValueError(f"predicate {self.qualified_name} has no parent class")


def tokenize(name: str) -> list[str]:
    """Lowercase tokens of a qualified name: camel-case and '::' split."""
    tokens = []
    for part in name.split("::"):
        tokens.extend(m.group(0).lower() for m in _CAMEL.finditer(part))
    return tokens


def _first_sentence(doc: str) -> str:
    head = doc.split(".", 1)[0]
    return head


@dataclass
class ConstructIndex:
    entries: dict[str, ConstructDoc] = field(default_factory=dict)
    keyword_map: dict[str, set[str]] = field(default_factory=dict)

    def add(self, doc: ConstructDoc) -> None:
        if doc.qualified_name in self.entries:
            raise DuplicateConstruct(doc.qualified_name)
        self.entries[doc.qualified_name] = doc
        tokens = set(tokenize(doc.qualified_name))
        tokens.update(_WORD.findall(_first_sentence(doc.doc).lower()))
        for token in tokens:
            self.keyword_map.setdefault(token, set()).add(doc.qualified_name)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def get(self, name: str) -> ConstructDoc | None:
        return self.entries.get(name)

    def search(self, token: str) -> set[str]:
        return set(self.keyword_map.get(token.lower(), set()))


def load_index(path: str | Path) -> ConstructIndex:
    index = ConstructIndex()
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), lineno) from exc
        if "version" in rec and "qualified_name" not in rec:
            continue  # header record
        try:
            doc = ConstructDoc(
                qualified_name=rec["qualified_name"],
                kind=rec["kind"],
                doc=rec.get("doc", ""),
                members=tuple(rec.get("members", [])),
                parent=rec.get("parent"),
            )
        except (KeyError, ValueError) as exc:
            raise ParseError(str(exc), lineno) from exc
        index.add(doc)
    return index


def validate_constructs(
    index: ConstructIndex, names: list[str]
) -> tuple[list[str], list[str]]:
    """Order-preserving partition of names into (present, absent)."""
    valid = [n for n in names if n in index]
    invalid = [n for n in names if n not in index]
    return valid, invalid


def refine_constructs(
    session: Session,
    index: ConstructIndex,
    keywords: list[str],
    rounds: int,
    observer: Callable[[Stage, str], None] | None = None,
) -> list[ConstructDoc]:
    """Propose-validate loop feeding nonexistent names back to the model.

    Stops as soon as a round validates cleanly; otherwise returns docs for the
    valid subset of the last round.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    invalid: list[str] = []
    valid: list[str] = []
    for _ in range(rounds):
        proposed = gateway.propose_constructs(session, keywords, invalid)
        if observer:
            observer(Stage.CONSTRUCT_PROPOSE, ", ".join(proposed))
        valid, invalid = validate_constructs(index, proposed)
        if observer:
            observer(Stage.CONSTRUCT_VALIDATE, f"valid={len(valid)} invalid={len(invalid)}")
        if not invalid:
            break
    docs = []
    seen = set()
    for name in valid:
        if name not in seen:
            seen.add(name)
            docs.append(index.entries[name])
    return docs


def docs_for_diagnostics(
    index: ConstructIndex, diagnostics: list[Diagnostic]
) -> list[ConstructDoc]:
    """Nearest-construct docs for every symbol mentioned in diagnostics.

    Resolution order per symbol: exact entry, then the parent class of a
    Class::predicate symbol, then keyword-map hits on the symbol's tokens.
    """
    hits: set[str] = set()
    for diag in diagnostics:
        for symbol in diag.symbols:
            if symbol in index:
                hits.add(symbol)
                continue
            if "::" in symbol:
                parent = symbol.split("::", 1)[0]
                if parent in index:
                    hits.add(parent)
                    continue
            for token in tokenize(symbol):
                hits.update(index.search(token))
    return [index.entries[name] for name in sorted(hits)]


def docs_text(docs: list[ConstructDoc]) -> str:
    """Plain-text rendering of docs for inclusion in a prompt."""
    parts = []
    for doc in docs:
        lines = [f"{doc.qualified_name} ({doc.kind}): {doc.doc}"]
        if doc.members:
            lines.append("  members: " + ", ".join(doc.members))
        parts.append("\n".join(lines))
    return "\n".join(parts)
