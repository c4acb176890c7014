import json
from pathlib import Path

import pytest

from askcode.config import default_index_path
from askcode.docs import load_index
from askcode.engine import (
    CompiledArtifact,
    CompileResult,
    DatabaseHandle,
    FakeEngine,
    snippets_digest,
    source_digest,
)
from askcode.errors import SnippetBuildError
from askcode.model import Diagnostic

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures" / "demo"
GOLDEN = Path(__file__).resolve().parent / "golden"


class StubEngine:
    """Programmable engine for pipeline tests: behavior given as callables."""

    def __init__(self, compile_ok=None, rows=None, snippet_ok=None, diagnostics=None):
        self._compile_ok = compile_ok or (lambda source: True)
        self._rows = rows or (lambda digest, db: [])
        self._snippet_ok = snippet_ok or (lambda snippets: True)
        self._diagnostics = diagnostics or [
            Diagnostic(message="cannot resolve BadSymbol", symbols=("BadSymbol",))
        ]

    def compile(self, query):
        if not query.source.strip():
            return CompileResult(ok=False, diagnostics=[Diagnostic(message="empty query source")])
        if self._compile_ok(query.source):
            return CompileResult(
                ok=True,
                artifact=CompiledArtifact(digest=source_digest(query.source), source=query.source),
            )
        return CompileResult(ok=False, diagnostics=list(self._diagnostics))

    def execute(self, artifact, db):
        return self._rows(artifact.digest, db)

    def build_snippet_database(self, snippets, language):
        if not self._snippet_ok(snippets):
            raise SnippetBuildError([Diagnostic(message="snippet does not compile")])
        return DatabaseHandle(
            id=f"sn-{snippets_digest(snippets)[:8]}",
            root="",
            analyzed_language=language,
            origin="snippet",
        )


@pytest.fixture(scope="session")
def mini_index():
    return load_index(default_index_path())


@pytest.fixture(scope="session")
def demo_fixtures():
    return json.loads((FIXTURES / "engine_fixtures.json").read_text())


@pytest.fixture
def demo_engine(demo_fixtures):
    return FakeEngine(demo_fixtures)


@pytest.fixture(scope="session")
def demo_scenario():
    """Key artifacts of the demo run, pulled out of the shipped cassette."""
    from askcode.gateway import extract_code_blocks
    from askcode.llm import load_cassette

    entries = load_cassette(FIXTURES / "cassette.jsonl")
    by_stage = {}
    for entry in entries:
        by_stage.setdefault(entry.stage, []).append(entry)
    block = lambda stage: extract_code_blocks(by_stage[stage][0].response)[0]
    return {
        "snippet": block("selftest_gen"),
        "broken_query": block("query_gen"),
        "narrow_query": block("repair"),
        "assist_query": block("assist_propose"),
        "final_query": block("assist_run"),
        "entries": entries,
    }


@pytest.fixture
def demo_config(tmp_path):
    """Config file pointing at the shipped demo fixtures, cache in tmp."""

    def make(**overrides):
        cfg = {
            "engine": "fake",
            "engine_fixtures": str(FIXTURES / "engine_fixtures.json"),
            "mode": "replay",
            "cassette": str(FIXTURES / "cassette.jsonl"),
            "cache_dir": str(tmp_path / "cache"),
        }
        cfg.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        return path

    return make
