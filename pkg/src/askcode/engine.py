"""Query-engine abstraction: a fixture-driven fake and a CodeQL subprocess adapter."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import EngineUnavailable, ExecutionFailure, SnippetBuildError, UnscriptedFixture
from .model import CandidateQuery, Cell, Diagnostic, Location

_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:::[A-Za-z_][A-Za-z0-9_]*)?")
_DIAG_LINE = re.compile(
    r"^(?P<file>[^:\s][^:]*):(?P<line>\d+):(?P<col>\d+):\s*(?P<sev>error|warning)[:\s]\s*(?P<msg>.*)$"
)
_LOCATION_URL = re.compile(
    r"^file://(?P<file>.*?):(?P<line>\d+):(?P<col>\d+):(?P<eline>\d+):(?P<ecol>\d+)$"
)


def extract_symbols(message: str) -> list[str]:
    """Code-identifier-shaped tokens of a diagnostic, in first-appearance order.

    A token counts as an identifier when it is qualified (Class::predicate) or
    carries an uppercase letter (class names, camelCase predicate names);
    plain lowercase words are prose.
    """
    seen = []
    for m in _IDENTIFIER.finditer(message):
        token = m.group(0)
        if ("::" in token or any(c.isupper() for c in token)) and token not in seen:
            seen.append(token)
    return seen


def parse_diagnostics(text: str) -> list[Diagnostic]:
    """Parse `file:line:col: severity: message` lines; anything else becomes a
    file-less diagnostic."""
    diags = []
    for line in text.splitlines():
        if not line.strip():
            continue
        m = _DIAG_LINE.match(line.strip())
        if m:
            diags.append(
                Diagnostic(
                    message=m.group("msg"),
                    severity=m.group("sev"),
                    file=m.group("file"),
                    line=int(m.group("line")),
                    column=int(m.group("col")),
                    symbols=tuple(extract_symbols(m.group("msg"))),
                )
            )
        else:
            diags.append(
                Diagnostic(
                    message=line.strip(),
                    severity="error",
                    symbols=tuple(extract_symbols(line)),
                )
            )
    return diags


@dataclass(frozen=True)
class DatabaseHandle:
    id: str
    root: str
    analyzed_language: str = "java"
    origin: str = "codebase"  # or "snippet"


@dataclass(frozen=True)
class CompiledArtifact:
    digest: str
    source: str
    path: str | None = None  # adapter-backed artifacts point at the query file


@dataclass
class CompileResult:
    ok: bool
    artifact: CompiledArtifact | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)


RawResultSet = list[tuple[Cell, ...]]


def source_digest(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def snippets_digest(snippets: list[tuple[str, str]]) -> str:
    h = hashlib.sha256()
    for name, src in snippets:
        h.update(name.encode("utf-8"))
        h.update(b"\x00")
        h.update(src.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


class Engine(Protocol):
    def compile(self, query: CandidateQuery) -> CompileResult: ...

    def execute(self, artifact: CompiledArtifact, db: DatabaseHandle) -> RawResultSet: ...

    def build_snippet_database(
        self, snippets: list[tuple[str, str]], language: str
    ) -> DatabaseHandle: ...


def _cell_from_json(obj: dict) -> Cell:
    if obj.get("type") == "location":
        return Location(
            file=obj["file"],
            line=obj["line"],
            column=obj.get("column", 0),
            end_line=obj.get("end_line"),
            end_column=obj.get("end_column"),
        )
    return obj.get("value", "")


def _diag_from_json(obj: dict) -> Diagnostic:
    message = obj["message"]
    return Diagnostic(
        message=message,
        severity=obj.get("severity", "error"),
        file=obj.get("file"),
        line=obj.get("line", 0),
        column=obj.get("column", 0),
        symbols=tuple(obj.get("symbols", extract_symbols(message))),
    )


class FakeEngine:
    """Fixture-driven engine keyed by content digests.

    Every behavior must be scripted; an unscripted query, database pair, or
    snippet set raises instead of fabricating a result.
    """

    def __init__(self, fixtures: dict):
        self._compile = fixtures.get("compile", {})
        self._execute = fixtures.get("execute", {})
        self._snippet_db = fixtures.get("snippet_db", {})

    @classmethod
    def from_file(cls, path: str | Path) -> "FakeEngine":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def compile(self, query: CandidateQuery) -> CompileResult:
        if not query.source.strip():
            return CompileResult(
                ok=False, diagnostics=[Diagnostic(message="empty query source")]
            )
        digest = source_digest(query.source)
        if digest not in self._compile:
            raise UnscriptedFixture(f"compile of unscripted query {digest[:12]}")
        entry = self._compile[digest]
        if entry.get("ok"):
            return CompileResult(
                ok=True, artifact=CompiledArtifact(digest=digest, source=query.source)
            )
        return CompileResult(
            ok=False,
            diagnostics=[_diag_from_json(d) for d in entry.get("diagnostics", [])],
        )

    def execute(self, artifact: CompiledArtifact, db: DatabaseHandle) -> RawResultSet:
        key = f"{artifact.digest}:{db.id}"
        if key not in self._execute:
            raise UnscriptedFixture(f"execute of unscripted pair {key[:24]}")
        return [tuple(_cell_from_json(c) for c in row) for row in self._execute[key]]

    def build_snippet_database(
        self, snippets: list[tuple[str, str]], language: str
    ) -> DatabaseHandle:
        digest = snippets_digest(snippets)
        if digest not in self._snippet_db:
            raise UnscriptedFixture(f"snippet build of unscripted set {digest[:12]}")
        entry = self._snippet_db[digest]
        if not entry.get("ok"):
            raise SnippetBuildError(
                [_diag_from_json(d) for d in entry.get("diagnostics", [])]
            )
        return DatabaseHandle(
            id=entry.get("id", f"snippet-{digest[:12]}"),
            root="",
            analyzed_language=language,
            origin="snippet",
        )


class CodeQLAdapter:
    """Drives the external CodeQL toolchain through subprocesses."""

    def __init__(self, codeql_path: str = "codeql", timeout: float = 300.0):
        self.codeql_path = codeql_path
        self.timeout = timeout
        self._workdir = Path(tempfile.mkdtemp(prefix="askcode-ql-"))

    def _run(self, args: list[str], cwd: Path | None = None) -> subprocess.CompletedProcess:
        try:
            return subprocess.run(
                [self.codeql_path, *args],
                capture_output=True,
                text=True,
                timeout=self.timeout,
                cwd=cwd,
            )
        except FileNotFoundError as exc:
            raise EngineUnavailable(f"codeql binary not found: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise EngineUnavailable(f"codeql timed out: {exc}") from exc

    def _query_dir(self, source: str) -> Path:
        digest = source_digest(source)
        qdir = self._workdir / f"query-{digest[:12]}"
        qdir.mkdir(parents=True, exist_ok=True)
        (qdir / "query.ql").write_text(source, encoding="utf-8")
        (qdir / "qlpack.yml").write_text(
            "name: askcode/adhoc\nversion: 0.0.1\ndependencies:\n  codeql/java-all: '*'\n",
            encoding="utf-8",
        )
        return qdir

    def compile(self, query: CandidateQuery) -> CompileResult:
        if not query.source.strip():
            return CompileResult(
                ok=False, diagnostics=[Diagnostic(message="empty query source")]
            )
        qdir = self._query_dir(query.source)
        self._run(["pack", "install", "--no-strict-mode", str(qdir)])
        proc = self._run(["query", "compile", str(qdir / "query.ql")])
        if proc.returncode == 0:
            return CompileResult(
                ok=True,
                artifact=CompiledArtifact(
                    digest=source_digest(query.source),
                    source=query.source,
                    path=str(qdir / "query.ql"),
                ),
            )
        diags = parse_diagnostics(proc.stderr or proc.stdout)
        if not any(d.severity == "error" for d in diags):
            diags.append(Diagnostic(message="query compilation failed"))
        return CompileResult(ok=False, diagnostics=diags)

    def execute(self, artifact: CompiledArtifact, db: DatabaseHandle) -> RawResultSet:
        if artifact.path is None:
            raise ExecutionFailure("artifact was not compiled by this adapter")
        bqrs = self._workdir / f"{artifact.digest[:12]}-{db.id}.bqrs"
        proc = self._run(
            [
                "query",
                "run",
                f"--database={db.root}",
                f"--output={bqrs}",
                artifact.path,
            ]
        )
        if proc.returncode != 0:
            raise ExecutionFailure("query execution failed", stderr=proc.stderr)
        decode = self._run(
            ["bqrs", "decode", "--format=csv", "--entities=url", str(bqrs)]
        )
        if decode.returncode != 0:
            raise ExecutionFailure("result decode failed", stderr=decode.stderr)
        return self._parse_csv(decode.stdout, db)

    @staticmethod
    def _parse_csv(text: str, db: DatabaseHandle) -> RawResultSet:
        rows: RawResultSet = []
        reader = csv.reader(io.StringIO(text))
        for i, record in enumerate(reader):
            if i == 0:
                continue  # header
            cells: list[Cell] = []
            for value in record:
                m = _LOCATION_URL.match(value)
                if m:
                    file = m.group("file")
                    root = str(Path(db.root).resolve())
                    if file.startswith(root):
                        file = file[len(root) :].lstrip("/")
                    cells.append(
                        Location(
                            file=file,
                            line=int(m.group("line")),
                            column=int(m.group("col")),
                            end_line=int(m.group("eline")),
                            end_column=int(m.group("ecol")),
                        )
                    )
                else:
                    cells.append(value)
            rows.append(tuple(cells))
        return rows

    def build_snippet_database(
        self, snippets: list[tuple[str, str]], language: str
    ) -> DatabaseHandle:
        digest = snippets_digest(snippets)
        src_root = self._workdir / f"snippets-{digest[:12]}"
        db_dir = self._workdir / f"snippetdb-{digest[:12]}"
        if db_dir.exists():
            shutil.rmtree(db_dir)
        src_root.mkdir(parents=True, exist_ok=True)
        for name, source in snippets:
            (src_root / name).write_text(source, encoding="utf-8")
        proc = self._run(
            [
                "database",
                "create",
                str(db_dir),
                f"--language={language}",
                "--build-mode=none",
                f"--source-root={src_root}",
            ]
        )
        if proc.returncode != 0:
            raise SnippetBuildError(parse_diagnostics(proc.stderr or proc.stdout))
        return DatabaseHandle(
            id=f"snippet-{digest[:12]}",
            root=str(db_dir),
            analyzed_language=language,
            origin="snippet",
        )
