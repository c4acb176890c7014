"""Litmus tests: run candidate queries on generated snippets and judge output."""

from __future__ import annotations

from dataclasses import dataclass

from . import gateway
from .engine import CompiledArtifact, Engine, RawResultSet, snippets_digest
from .errors import SnippetBuildError
from .llm import PromptTemplate, Session
from .model import (
    Diagnostic,
    Expectation,
    ExpectationKind,
    Location,
    SelfTestCase,
    Stage,
)

SNIPPET_REPAIR_TEMPLATE = PromptTemplate(
    Stage.SELFTEST_GEN,
    "This test file does not compile:\n{snippet}\n\n"
    "Compiler output:\n{diagnostics}\n\n"
    "Fix the file so it compiles, keeping the behavior it was written to\n"
    "demonstrate. Reply with the full file in a single fenced code block.",
)


@dataclass(frozen=True)
class CaseResult:
    case_index: int
    observed_rows: int
    satisfied: bool


@dataclass
class SelfTestVerdict:
    passed: bool
    per_case: list[CaseResult]
    tables: list[RawResultSet]


def _satisfies(expectation: Expectation, rows: RawResultSet) -> bool:
    if expectation.kind is ExpectationKind.NON_EMPTY:
        return len(rows) > 0
    if expectation.kind is ExpectationKind.EXACT_ROW_COUNT:
        return len(rows) == expectation.row_count
    observed = {
        (cell.file, cell.line)
        for row in rows
        for cell in row
        if isinstance(cell, Location)
    }
    return all((loc.file, loc.line) in observed for loc in expectation.locations)


def evaluate(
    artifact: CompiledArtifact,
    cases: list[SelfTestCase],
    engine: Engine,
    language: str = "java",
    _db_cache: dict | None = None,
) -> SelfTestVerdict:
    """Run the artifact over each case's snippet database.

    Databases are cached by snippet content, so identical snippets across
    cases build once per run.
    """
    if not cases:
        raise ValueError("cases must be non-empty")
    cache = _db_cache if _db_cache is not None else {}
    per_case = []
    tables = []
    for i, case in enumerate(cases):
        snippets = [(case.filename, case.source)]
        key = snippets_digest(snippets)
        if key not in cache:
            try:
                cache[key] = engine.build_snippet_database(snippets, language)
            except SnippetBuildError as exc:
                raise SnippetBuildError(exc.diagnostics, case_index=i) from exc
        rows = engine.execute(artifact, cache[key])
        tables.append(rows)
        per_case.append(CaseResult(i, len(rows), _satisfies(case.expectation, rows)))
    return SelfTestVerdict(
        passed=all(r.satisfied for r in per_case), per_case=per_case, tables=tables
    )


def repair_snippet(
    session: Session, case: SelfTestCase, diagnostics: list[Diagnostic]
) -> SelfTestCase:
    """Ask the model for a compiling revision of a broken snippet."""
    diag_text = "\n".join(d.message for d in diagnostics) or "(no output)"
    prompt = SNIPPET_REPAIR_TEMPLATE.render(snippet=case.source, diagnostics=diag_text)
    blocks = gateway._ask(
        session,
        Stage.SELFTEST_GEN,
        prompt,
        lambda text: gateway.extract_code_blocks(text) or None,
        "Reply with the fixed file in a single fenced code block.",
    )
    return SelfTestCase(
        filename=case.filename,
        source=blocks[0],
        expectation=case.expectation,
        note=case.note,
    )
