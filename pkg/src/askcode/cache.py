"""Cache of synthesized queries, keyed by normalized question and schema."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

from .model import Question


def _normalize_goal(goal: str) -> str:
    return re.sub(r"\s+", " ", goal.strip().lower())


def _schema_digest(question: Question) -> str:
    payload = json.dumps([[n, d] for n, d in question.schema.columns])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def cache_key(question: Question) -> str:
    h = hashlib.sha256()
    h.update(_normalize_goal(question.goal).encode("utf-8"))
    h.update(b"\x00")
    h.update(_schema_digest(question).encode("utf-8"))
    h.update(b"\x00")
    h.update(question.analyzed_language.value.encode("utf-8"))
    return h.hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    key: str
    goal: str
    language: str
    source: str
    provenance: str


class QueryCache:
    """One JSON file per entry; only queries that compiled at store time are
    admitted by callers."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, question: Question) -> CacheEntry | None:
        path = self._path(cache_key(question))
        if not path.exists():
            return None
        rec = json.loads(path.read_text(encoding="utf-8"))
        return CacheEntry(**rec)

    def put(self, question: Question, source: str, provenance: str = "pipeline") -> CacheEntry:
        key = cache_key(question)
        entry = CacheEntry(
            key=key,
            goal=question.goal,
            language=question.analyzed_language.value,
            source=source,
            provenance=provenance,
        )
        self._path(key).write_text(
            json.dumps(entry.__dict__, indent=2), encoding="utf-8"
        )
        return entry

    def list_entries(self) -> list[CacheEntry]:
        entries = []
        for path in sorted(self.root.glob("*.json")):
            rec = json.loads(path.read_text(encoding="utf-8"))
            entries.append(CacheEntry(**rec))
        return entries

    def show(self, key: str) -> CacheEntry | None:
        path = self._path(key)
        if not path.exists():
            return None
        return CacheEntry(**json.loads(path.read_text(encoding="utf-8")))

    def clear(self) -> int:
        count = 0
        for path in self.root.glob("*.json"):
            path.unlink()
            count += 1
        return count
