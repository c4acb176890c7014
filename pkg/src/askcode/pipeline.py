"""The pipeline state machine: preprocess, generate, compile-repair,
self-test, assist, final execution."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from . import docs as docs_mod
from . import gateway, selftest
from .docs import ConstructIndex
from .engine import CompileResult, DatabaseHandle, Engine
from .errors import (
    AskcodeError,
    EngineUnavailable,
    ExecutionFailure,
    MalformedLLMOutput,
    SessionFailure,
    SnippetBuildError,
)
from .llm import Session
from .model import (
    AnswerReport,
    CandidateQuery,
    Outcome,
    PipelineBudget,
    PipelineEvent,
    Question,
    QueryStatus,
    ResultTable,
    SelfTestCase,
    Stage,
)
from .results import conform

# Self-test cases taken from one model response are capped so an adversarial
# response cannot inflate the snippet-repair call budget.
MAX_SELFTEST_CASES = 8

# Compile-repair budget for assistive queries; they are throwaway diagnostics
# and do not deserve the full answer-query budget.
ASSIST_MINI_REPAIR_ROUNDS = 2


def _short(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def llm_call_bound(budget: PipelineBudget) -> int:
    """Upper bound on LLM calls for one run; every stage may reprompt once."""
    per_stage = (
        1  # self-test generation
        + MAX_SELFTEST_CASES * budget.snippet_repair_rounds
        + 1  # keyword extraction
        + budget.doc_refinement_rounds
        + 1  # initial query
        + budget.compile_repair_rounds
        + budget.assist_rounds
        * (2 + ASSIST_MINI_REPAIR_ROUNDS + budget.compile_repair_rounds)
    )
    return 2 * per_stage


@dataclass
class Transcript:
    events: list[PipelineEvent] = field(default_factory=list)
    _tick: int = 0

    def record(self, stage: Stage, digest: str) -> None:
        self.events.append(PipelineEvent(stage=stage, digest=digest, ts=self._tick))
        self._tick += 1


def validate_transcript(events: list[PipelineEvent]) -> None:
    """Check the stage-order rules; raises ValueError on a violation."""
    seen: set[Stage] = set()
    last_ts = -1
    failing_selftest_seen = False
    for i, ev in enumerate(events):
        if ev.ts <= last_ts:
            raise ValueError(f"event {i}: timestamps not strictly increasing")
        last_ts = ev.ts
        if ev.stage is Stage.COMPILE and Stage.QUERY_GEN not in seen:
            raise ValueError(f"event {i}: compile before query_gen")
        if ev.stage is Stage.REPAIR and Stage.COMPILE not in seen:
            raise ValueError(f"event {i}: repair before compile")
        if ev.stage is Stage.SELFTEST_RUN and Stage.COMPILE not in seen:
            raise ValueError(f"event {i}: selftest_run before compile")
        if ev.stage in (Stage.ASSIST_PROPOSE, Stage.ASSIST_RUN):
            if not failing_selftest_seen:
                raise ValueError(f"event {i}: {ev.stage.value} before a failing selftest_run")
        if ev.stage is Stage.CONSTRUCT_VALIDATE and Stage.CONSTRUCT_PROPOSE not in seen:
            raise ValueError(f"event {i}: construct_validate before construct_propose")
        if ev.stage is Stage.FINAL_RUN and i != len(events) - 1:
            raise ValueError(f"event {i}: final_run is not the last event")
        if ev.stage is Stage.SELFTEST_RUN and ev.digest.startswith("fail"):
            failing_selftest_seen = True
        seen.add(ev.stage)


def export_transcript(events: list[PipelineEvent]) -> bytes:
    lines = [
        json.dumps({"stage": ev.stage.value, "ts": ev.ts, "digest": ev.digest})
        for ev in events
    ]
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def run_compile_repair(
    session: Session,
    candidate: CandidateQuery,
    engine: Engine,
    index: ConstructIndex,
    rounds: int,
    transcript: Transcript,
) -> tuple[CandidateQuery, CompileResult | None]:
    """Compile; on errors, map diagnostics to docs and prompt revisions.

    Returns the query (compiled, or still a draft with diagnostics) and the
    last successful compile result.
    """
    if candidate.status is not QueryStatus.DRAFT:
        raise ValueError("compile-repair expects a draft query")
    current = candidate
    result = engine.compile(current)
    transcript.record(Stage.COMPILE, ("ok " if result.ok else "err ") + _short(current.source))
    for _ in range(rounds):
        if result.ok:
            break
        current.diagnostics = list(result.diagnostics)
        relevant = docs_mod.docs_for_diagnostics(index, result.diagnostics)
        diag_text = "\n".join(d.message for d in result.diagnostics)
        revised = gateway.repair_query(
            session, diag_text, docs_mod.docs_text(relevant)
        )
        revised.kind = current.kind
        transcript.record(Stage.REPAIR, _short(revised.source))
        current = revised
        result = engine.compile(current)
        transcript.record(
            Stage.COMPILE, ("ok " if result.ok else "err ") + _short(current.source)
        )
    if result.ok:
        current.status = QueryStatus.COMPILED
        current.diagnostics = []
        return current, result
    current.diagnostics = list(result.diagnostics)
    return current, None


def run_test_assist_loop(
    session: Session,
    candidate: CandidateQuery,
    tests: list[SelfTestCase],
    engine: Engine,
    index: ConstructIndex,
    budget: PipelineBudget,
    transcript: Transcript,
    db_cache: dict,
    language: str,
) -> tuple[CandidateQuery, CompileResult]:
    """Self-test the compiled query; on failure, debug it with assistive
    queries until it passes or the assist budget runs out."""
    if candidate.status is not QueryStatus.COMPILED:
        raise ValueError("test-assist loop expects a compiled query")
    if not tests:
        raise ValueError("tests must be non-empty")

    result = engine.compile(candidate)  # re-derive the artifact handle
    if not result.ok:
        raise ExecutionFailure("compiled query stopped compiling")

    def run_tests(artifact) -> selftest.SelfTestVerdict:
        verdict = selftest.evaluate(artifact, tests, engine, language, _db_cache=db_cache)
        rows = ",".join(str(r.observed_rows) for r in verdict.per_case)
        transcript.record(
            Stage.SELFTEST_RUN, ("pass" if verdict.passed else "fail") + f" rows={rows}"
        )
        return verdict

    verdict = run_tests(result.artifact)
    if verdict.passed:
        candidate.status = QueryStatus.SELF_TEST_PASSED
        return candidate, result

    current, current_result = candidate, result
    for _ in range(budget.assist_rounds):
        observed = sum(r.observed_rows for r in verdict.per_case)
        assistive = gateway.propose_assistive_query(session, current, observed)
        transcript.record(Stage.ASSIST_PROPOSE, _short(assistive.source))
        assistive, assist_result = run_compile_repair(
            session, assistive, engine, index, ASSIST_MINI_REPAIR_ROUNDS, transcript
        )
        if assist_result is None:
            continue  # assistive query never compiled; round consumed
        snippet_db = next(iter(db_cache.values()))
        raw = engine.execute(assist_result.artifact, snippet_db)
        transcript.record(Stage.ASSIST_RUN, f"rows={len(raw)}")
        feedback_table = _generic_table(raw)
        revised = gateway.feed_assistive_results(session, feedback_table)
        revised, revised_result = run_compile_repair(
            session, revised, engine, index, budget.compile_repair_rounds, transcript
        )
        if revised_result is None:
            continue
        current, current_result = revised, revised_result
        verdict = run_tests(revised_result.artifact)
        if verdict.passed:
            current.status = QueryStatus.SELF_TEST_PASSED
            return current, current_result
    return current, current_result


def _generic_table(raw) -> ResultTable:
    from .model import OutputSchema

    arity = max((len(row) for row in raw), default=1)
    padded = [row + ("",) * (arity - len(row)) for row in raw]
    schema = OutputSchema(tuple((f"c{i + 1}", "") for i in range(arity)))
    return ResultTable(schema=schema, rows=padded)


def answer_question(
    q: Question,
    db: DatabaseHandle,
    engine: Engine,
    index: ConstructIndex,
    session: Session,
    budget: PipelineBudget | None = None,
) -> AnswerReport:
    """End-to-end run over one question; never raises for pipeline-internal
    failures, returning a report with a partial transcript instead."""
    budget = budget or PipelineBudget()
    transcript = Transcript()
    final_query: CandidateQuery | None = None

    def report(outcome: Outcome, table: ResultTable | None = None) -> AnswerReport:
        rep = AnswerReport(
            outcome=outcome,
            final_query=final_query,
            table=table,
            transcript=transcript.events,
            prompt_bytes_total=session.bytes_sent,
            session_id=session.id,
        )
        validate_transcript(rep.transcript)
        return rep

    db_cache: dict = {}
    language = q.analyzed_language.value
    try:
        # Preprocess: self-tests, then documentation retrieval.
        tests = gateway.generate_selftests(session, q)[:MAX_SELFTEST_CASES]
        transcript.record(
            Stage.SELFTEST_GEN, _short("\n".join(t.source for t in tests))
        )
        tests = _ensure_compilable(
            session, tests, engine, language, budget, transcript, db_cache
        )
        if not tests:
            return report(Outcome.FAILED)

        keywords = gateway.extract_keywords(session, q)
        transcript.record(Stage.KEYWORD_EXTRACT, ", ".join(keywords)[:80])

        construct_docs = docs_mod.refine_constructs(
            session,
            index,
            keywords,
            budget.doc_refinement_rounds,
            observer=transcript.record,
        )

        draft = gateway.generate_query(
            session, q, docs_mod.docs_text(construct_docs), tests
        )
        transcript.record(Stage.QUERY_GEN, _short(draft.source))
        final_query = draft

        compiled, compile_result = run_compile_repair(
            session, draft, engine, index, budget.compile_repair_rounds, transcript
        )
        final_query = compiled
        if compile_result is None:
            return report(Outcome.FAILED)

        tested, tested_result = run_test_assist_loop(
            session,
            compiled,
            tests,
            engine,
            index,
            budget,
            transcript,
            db_cache,
            language,
        )
        final_query = tested

        raw = engine.execute(tested_result.artifact, db)
        table = conform(raw, q.schema)
        transcript.record(Stage.FINAL_RUN, f"rows={len(table.rows)}")
        if tested.status is QueryStatus.SELF_TEST_PASSED:
            tested.status = QueryStatus.FINAL
            return report(Outcome.VALIDATED, table)
        table.warnings.append(
            "self-tests never passed within budget; results are best-effort"
        )
        return report(Outcome.BUDGET_EXHAUSTED_BEST_EFFORT, table)
    except (MalformedLLMOutput, SnippetBuildError):
        return report(Outcome.FAILED)
    except (EngineUnavailable, SessionFailure, ExecutionFailure):
        return report(Outcome.FAILED)


def _ensure_compilable(
    session: Session,
    tests: list[SelfTestCase],
    engine: Engine,
    language: str,
    budget: PipelineBudget,
    transcript: Transcript,
    db_cache: dict,
) -> list[SelfTestCase]:
    """Build each snippet's database, repairing broken snippets within budget;
    cases that never compile are dropped."""
    from .engine import snippets_digest

    usable = []
    for case in tests:
        current = case
        for attempt in range(budget.snippet_repair_rounds + 1):
            snippets = [(current.filename, current.source)]
            key = snippets_digest(snippets)
            try:
                if key not in db_cache:
                    db_cache[key] = engine.build_snippet_database(snippets, language)
                usable.append(current)
                break
            except SnippetBuildError as exc:
                if attempt == budget.snippet_repair_rounds:
                    break
                try:
                    current = selftest.repair_snippet(session, current, exc.diagnostics)
                except MalformedLLMOutput:
                    break
                transcript.record(Stage.SELFTEST_GEN, "repair " + _short(current.source))
    return usable
