"""End-to-end acceptance suite; each test prints one PASS line when green.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
"""

import json
import random
import shutil
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

from askcode import docs as docs_mod
from askcode import pipeline, results
from askcode.cli import EXIT_BY_OUTCOME, main
from askcode.config import default_index_path
from askcode.docs import refine_constructs, validate_constructs
from askcode.engine import DatabaseHandle, FakeEngine
from askcode.llm import FunctionTransport, ReplayTransport, Session, load_cassette
from askcode.model import (
    Location,
    Outcome,
    OutputSchema,
    PipelineBudget,
    PipelineEvent,
    Question,
    Stage,
)

from conftest import FIXTURES, GOLDEN, StubEngine

DEMO_GOAL = (
    "Identify all method calls of the form array1.equals(array2), "
    "where array1 and array2 are two arrays."
)
DEMO_SCHEMA = "location:The location of the method call"
DEMO_DB = "demo-codebase"

REFINE_KEYWORDS = [
    "identify", "method", "calls", "array1", "equals", "array2",
    "compare", "arrays",
]


def demo_question():
    return Question(
        goal=DEMO_GOAL,
        schema=OutputSchema((("location", "The location of the method call"),)),
    )


def write_config(tmp_path, cassette=None, name="config.json"):
    cfg = {
        "engine": "fake",
        "engine_fixtures": str(FIXTURES / "engine_fixtures.json"),
        "mode": "replay",
        "cassette": str(cassette or (FIXTURES / "cassette.jsonl")),
        "cache_dir": str(tmp_path / "cache"),
    }
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run_demo_ask(tmp_path, config_path, tag=""):
    out = tmp_path / f"out{tag}"
    out.mkdir(exist_ok=True)
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "ask",
            "--db", DEMO_DB,
            "--question", DEMO_GOAL,
            "--schema", DEMO_SCHEMA,
            "--config", str(config_path),
            "--no-cache",
            "--transcript", str(out / "transcript.jsonl"),
            "--export", f"csv={out / 'table.csv'}",
            "--export", f"structured={out / 'table.structured.jsonl'}",
            "--export", f"sarif={out / 'table.sarif'}",
        ],
    )
    return result, out


def run_demo_library():
    engine = FakeEngine.from_file(FIXTURES / "engine_fixtures.json")
    index = docs_mod.load_index(default_index_path())
    transport = ReplayTransport.from_file(FIXTURES / "cassette.jsonl")
    session = Session(transport=transport, id="fixture-session")
    report = pipeline.answer_question(
        demo_question(), DatabaseHandle(id=DEMO_DB, root=""), engine, index, session
    )
    return report, transport


def test_criterion_1_demo_scenario_replay(tmp_path):
    start = time.monotonic()
    result, out = run_demo_ask(tmp_path, write_config(tmp_path))
    elapsed = time.monotonic() - start
    assert result.exit_code == 0, result.output
    assert elapsed < 5.0

    events = [
        json.loads(line)
        for line in (out / "transcript.jsonl").read_text().splitlines()
    ]
    stages = [e["stage"] for e in events]
    # broken draft, then a compiling revision
    compile_digests = [e["digest"] for e in events if e["stage"] == "compile"]
    assert compile_digests[0].startswith("err")
    assert compile_digests[1].startswith("ok")
    # compiled query finds nothing on the snippet, triggering an assist round
    selftest_digests = [e["digest"] for e in events if e["stage"] == "selftest_run"]
    assert selftest_digests[0] == "fail rows=0"
    assert selftest_digests[-1] == "pass rows=3"
    assert "assist_propose" in stages and "assist_run" in stages
    assert stages[-1] == "final_run"
    pipeline.validate_transcript(
        [PipelineEvent(Stage(e["stage"]), e["digest"], e["ts"]) for e in events]
    )
    assert result.output.count(".java:") >= 3
    print(f"\nACCEPTANCE 1: PASS - demo scenario replay ({elapsed:.2f}s)")


def _adversarial_transport(rng):
    flavor = rng.randrange(3)

    def respond(stage, prompt):
        if flavor == 0:
            return "".join(rng.choices("abcdefgh \n.,!", k=rng.randrange(1, 60)))
        if flavor == 1 and rng.random() < 0.3:
            return "nothing useful"
        body = "".join(rng.choices("abcxyz(). \n", k=rng.randrange(1, 40)))
        return f"```\n{body or 'x'}\n```"

    return FunctionTransport(respond)


def _adversarial_engine(rng):
    flavor = rng.randrange(3)
    if flavor == 0:  # never compiles
        return StubEngine(compile_ok=lambda src: False)
    if flavor == 1:  # compiles, never any rows
        return StubEngine(rows=lambda digest, db: [])
    return StubEngine(  # snippets randomly broken, rows empty
        snippet_ok=lambda snippets: rng.random() < 0.5,
        rows=lambda digest, db: [],
    )


def test_criterion_2_termination_fuzzing():
    start = time.monotonic()
    rng = random.Random(20260826)
    question = demo_question()
    db = DatabaseHandle(id="fuzz", root="")
    index = docs_mod.load_index(default_index_path())
    for _ in range(200):
        budget = PipelineBudget(
            doc_refinement_rounds=rng.randrange(1, 4),
            compile_repair_rounds=rng.randrange(1, 4),
            assist_rounds=rng.randrange(1, 3),
            snippet_repair_rounds=rng.randrange(1, 3),
        )
        transport = _adversarial_transport(rng)
        session = Session(transport=transport)
        report = pipeline.answer_question(
            question, db, _adversarial_engine(rng), index, session, budget
        )
        assert transport.calls <= pipeline.llm_call_bound(budget)
        assert report.outcome in (Outcome.FAILED, Outcome.BUDGET_EXHAUSTED_BEST_EFFORT)
        assert EXIT_BY_OUTCOME[report.outcome] in (1, 2)
        pipeline.validate_transcript(report.transcript)
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    print(f"ACCEPTANCE 2: PASS - 200 adversarial runs terminate ({elapsed:.1f}s)")


def _oracle_metrics(cases, key):
    """Brute-force re-derivation of every metric by direct enumeration."""

    def proj(loc):
        if key == "file_line":
            return (loc.file, loc.line)
        return (loc.file, loc.line, loc.column)

    def uniq(locs):
        out = []
        for loc in locs:
            if proj(loc) not in out:
                out.append(proj(loc))
        return out

    per_case = []
    for case in cases:
        fu, ru = uniq(case.found), uniq(case.reference)
        matched = 0
        for r in ru:
            for f in fu:
                if f == r:
                    matched += 1
                    break
        precision = matched / len(fu) if fu else None
        recall = matched / len(ru) if ru else None
        per_case.append((len(fu), len(ru), matched, precision, recall))

    precisions = [p for *_, p, _ in per_case if p is not None]
    recalls = [r for *_, r in per_case if r is not None]
    macro_p = sum(precisions) / len(precisions) if precisions else None
    macro_r = sum(recalls) / len(recalls) if recalls else None
    total_f = sum(f for f, *_ in per_case)
    total_r = sum(r for _, r, *_ in per_case)
    total_m = sum(m for _, _, m, *_ in per_case)
    micro_p = total_m / total_f if total_f else None
    micro_r = total_m / total_r if total_r else None
    news = [(f, f - m) for f, _, m, *_ in per_case]
    return macro_p, macro_r, len(cases) - len(precisions), len(cases) - len(recalls), micro_p, micro_r, news


def test_criterion_3_metrics_oracle_equivalence():
    from askcode.bench import BenchmarkCase, compute_metrics, new_warning_fraction

    rng = random.Random(1337)
    files = ["A.java", "B.java", "c/D.java"]

    def random_locs():
        return {
            Location(
                file=rng.choice(files),
                line=rng.randrange(1, 7),
                column=rng.randrange(0, 4),
            )
            for _ in range(rng.randrange(0, 11))
        }

    for _ in range(1000):
        key = rng.choice(["file_line", "file_line_col"])
        cases = [
            BenchmarkCase(id=f"c{i}", reference=random_locs(), found=random_locs())
            for i in range(rng.randrange(1, 7))
        ]
        got = compute_metrics(cases, key)
        macro_p, macro_r, excl_p, excl_r, micro_p, micro_r, news = _oracle_metrics(
            cases, key
        )
        assert got.macro_precision == macro_p
        assert got.macro_recall == macro_r
        assert got.macro_excluded_precision == excl_p
        assert got.macro_excluded_recall == excl_r
        assert got.micro_precision == micro_p
        assert got.micro_recall == micro_r
        assert [new_warning_fraction(c, key) for c in cases] == news
    print("ACCEPTANCE 3: PASS - metrics match brute-force oracle on 1000 case sets")


def test_criterion_4_construct_validation(mini_index):
    proposal = [
        "MethodCall",
        "MethodCall::getReceiver",
        "MethodCall::getArgument",
        "ArrayType",
        "ArrayType::getElementType",
    ]
    _, invalid = validate_constructs(mini_index, proposal)
    assert invalid == [
        "MethodCall::getReceiver",
        "ArrayType",
        "ArrayType::getElementType",
    ]
    transport = ReplayTransport.from_file(FIXTURES / "refine_cassette.jsonl")
    session = Session(transport=transport, id="refine-session")
    docs = refine_constructs(session, mini_index, REFINE_KEYWORDS, rounds=3)
    assert transport.calls == 2
    assert docs and all(d.qualified_name in mini_index.entries for d in docs)
    print("ACCEPTANCE 4: PASS - construct partition and 2-round refinement")


def test_criterion_5_determinism_and_goldens(tmp_path):
    result_a, out_a = run_demo_ask(tmp_path, write_config(tmp_path), tag="a")
    result_b, out_b = run_demo_ask(tmp_path, write_config(tmp_path), tag="b")
    assert result_a.exit_code == 0 and result_b.exit_code == 0
    assert result_a.output == result_b.output
    for name, golden in [
        ("transcript.jsonl", "transcript.jsonl"),
        ("table.csv", "table.csv"),
        ("table.structured.jsonl", "table.structured.jsonl"),
        ("table.sarif", "table.sarif"),
    ]:
        bytes_a = (out_a / name).read_bytes()
        bytes_b = (out_b / name).read_bytes()
        assert bytes_a == bytes_b
        assert bytes_a == (GOLDEN / golden).read_bytes(), f"golden drift: {name}"
    assert (GOLDEN / "table.txt").read_text() == results.render(
        results.parse_structured((out_a / "table.structured.jsonl").read_bytes())
    ) + "\n"
    print("ACCEPTANCE 5: PASS - byte-identical replays matching goldens")


def test_criterion_6_certificate_property():
    report, _ = run_demo_library()
    assert report.outcome is Outcome.VALIDATED
    engine = FakeEngine.from_file(FIXTURES / "engine_fixtures.json")
    compile_result = engine.compile(report.final_query)
    assert compile_result.ok
    raw = engine.execute(compile_result.artifact, DatabaseHandle(id=DEMO_DB, root=""))
    reproduced = results.conform(raw, demo_question().schema)
    assert reproduced.rows == report.table.rows
    assert results.export_structured(reproduced) == results.export_structured(report.table)
    print("ACCEPTANCE 6: PASS - re-execution reproduces the reported table")


def test_criterion_7_cache_reuse(tmp_path):
    config = write_config(tmp_path)
    runner = CliRunner()
    first = runner.invoke(
        main,
        ["ask", "--db", DEMO_DB, "--question", DEMO_GOAL, "--schema", DEMO_SCHEMA,
         "--config", str(config)],
    )
    assert first.exit_code == 0, first.output

    # Second run: the cassette is empty, so any LLM call would fail loudly.
    empty = tmp_path / "empty_cassette.jsonl"
    empty.write_text("")
    config2 = write_config(tmp_path, cassette=empty, name="config2.json")
    second = runner.invoke(
        main,
        ["ask", "--db", DEMO_DB, "--question", DEMO_GOAL, "--schema", DEMO_SCHEMA,
         "--config", str(config2)],
    )
    assert second.exit_code == 0, second.output
    assert "provenance: cache" in second.output

    def table_lines(output):
        return [line for line in output.splitlines() if ".java:" in line]

    assert table_lines(first.output) == table_lines(second.output)
    print("ACCEPTANCE 7: PASS - cache hit answers with zero LLM calls")


def test_criterion_8_prompt_accounting():
    report, _ = run_demo_library()
    entries = load_cassette(FIXTURES / "cassette.jsonl")
    cassette_bytes = sum(len(e.request.encode("utf-8")) for e in entries)
    assert report.prompt_bytes_total == cassette_bytes
    print(f"ACCEPTANCE 8: PASS - prompt bytes exact ({cassette_bytes})")


@pytest.mark.skipif(shutil.which("codeql") is None, reason="codeql toolchain not installed")
def test_criterion_9_external_adapter_smoke():
    from askcode.engine import CodeQLAdapter
    from askcode.model import CandidateQuery

    external = Path(__file__).resolve().parent.parent / "fixtures" / "external"
    query = (external / "array_equals.ql").read_text()
    snippets = [
        (p.name, p.read_text()) for p in sorted(external.glob("*.java"))
    ]
    adapter = CodeQLAdapter()
    db = adapter.build_snippet_database(snippets, "java")
    compiled = adapter.compile(CandidateQuery(source=query))
    assert compiled.ok, compiled.diagnostics
    rows = adapter.execute(compiled.artifact, db)
    assert len(rows) == 3
    print("ACCEPTANCE 9: PASS - external toolchain finds 3 rows")
