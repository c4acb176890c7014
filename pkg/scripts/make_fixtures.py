#!/usr/bin/env python3
"""Regenerate the demo fixtures and golden files.

Runs the array-equality demo scenario through the real pipeline with a
scripted transport in record mode, so the shipped cassette digests always
match the current prompt templates. Run from the repo root:

    python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from askcode import docs as docs_mod
from askcode import pipeline, results
from askcode.config import default_index_path
from askcode.engine import DatabaseHandle, FakeEngine, snippets_digest, source_digest
from askcode.llm import RecordingTransport, ScriptedTransport, Session, save_cassette
from askcode.model import Outcome, OutputSchema, PipelineBudget, Question

FIXTURES = REPO / "fixtures" / "demo"
GOLDEN = REPO / "tests" / "golden"

SNIPPET = """\
public class myClass {
 public static void main(String[] args) {
  Object[] arr1 = {1, 2, 3};
  int[] arr2 = {1, 2, 3};
  int[] arr3 = {4, 5, 6};
  boolean r1 = arr1.equals(arr2);
  boolean r2 = arr1.equals(arr3);
  boolean r3 = arr1.equals(arr1);
  System.out.println(r1);
  System.out.println(r2);
  System.out.println(r3);
 }
}"""

QUERY_BROKEN = """\
import java
from MethodCall c, Variable v1, Variable v2
where c.getMethod().getName() = "equals" and
c.getQualifier() = v1.getAnAccess() and
c.getAnArgument() = v2.getAnAccess() and
v1.getType().(ArrayType) and
v2.getType().(ArrayType)
select c.getLocation()"""

QUERY_NARROW = """\
import java
from Call c, Method m,
Expr e1, Expr e2
where c.getCallee() = m and
m.hasName("equals") and
c.getAnArgument() = e2 and
c.getQualifier() = e1 and
e1.getType().hasName("int[]") and
e2.getType().hasName("int[]")
select c.getLocation()"""

QUERY_ASSIST = """\
import java
from MethodCall c
where c.getMethod().getName() = "equals"
select c.getQualifier().getType(),
c.getArgument(0).getType()"""

QUERY_FINAL = """\
import java
from MethodCall c, Expr e1,
Expr e2, Type t1, Type t2
where
c.getMethod().getName() = "equals" and
c.getQualifier() = e1 and
c.getArgument(0) = e2 and
e1.getType() = t1 and
e2.getType() = t2 and
t1 instanceof Array and
t2 instanceof Array
select c.getLocation()"""

GOAL = (
    "Identify all method calls of the form array1.equals(array2), "
    "where array1 and array2 are two arrays."
)
SCHEMA = OutputSchema((("location", "The location of the method call"),))
DB_ID = "demo-codebase"

RESPONSES = [
    # self-test generation
    "Here is a test file that a correct analyzer should flag three times:\n\n"
    f"```java\n{SNIPPET}\n```\n",
    # keyword extraction
    "identify, method, calls, array1, equals, array2, compare, arrays",
    # construct proposal, round 1 (three of these do not exist)
    "MethodCall, MethodCall::getReceiver, MethodCall::getArgument, "
    "ArrayType, ArrayType::getElementType",
    # construct proposal, round 2 after feedback
    "MethodCall, MethodCall::getMethod, MethodCall::getQualifier, "
    "MethodCall::getArgument, Array, Array::getComponentType",
    # initial query (hallucinates ArrayType, does not compile)
    f"```ql\n{QUERY_BROKEN}\n```\n",
    # repaired query (compiles, but only matches int[] and finds nothing)
    f"```ql\n{QUERY_NARROW}\n```\n",
    # assistive query proposal
    "A permissive query that prints the qualifier and argument types of "
    f"every equals call:\n\n```ql\n{QUERY_ASSIST}\n```\n",
    # revised query after seeing the assistive output
    f"```ql\n{QUERY_FINAL}\n```\n",
]


def build_engine_fixtures() -> dict:
    snippet_key = snippets_digest([("Test1.java", SNIPPET)])
    snippet_db_id = f"snippet-{snippet_key[:12]}"
    loc = lambda file, line, col: {
        "type": "location",
        "file": file,
        "line": line,
        "column": col,
    }
    text = lambda value: {"type": "text", "value": value}
    return {
        "compile": {
            source_digest(QUERY_BROKEN): {
                "ok": False,
                "diagnostics": [
                    {
                        "message": "could not resolve type ArrayType",
                        "file": "query.ql",
                        "line": 7,
                        "column": 15,
                    }
                ],
            },
            source_digest(QUERY_NARROW): {"ok": True},
            source_digest(QUERY_ASSIST): {"ok": True},
            source_digest(QUERY_FINAL): {"ok": True},
        },
        "execute": {
            f"{source_digest(QUERY_NARROW)}:{snippet_db_id}": [],
            f"{source_digest(QUERY_ASSIST)}:{snippet_db_id}": [
                [text("Object[]"), text("int[]")],
                [text("Object[]"), text("int[]")],
                [text("Object[]"), text("Object[]")],
            ],
            f"{source_digest(QUERY_FINAL)}:{snippet_db_id}": [
                [loc("Test1.java", 6, 16)],
                [loc("Test1.java", 7, 16)],
                [loc("Test1.java", 8, 16)],
            ],
            f"{source_digest(QUERY_FINAL)}:{DB_ID}": [
                [loc("src/main/java/com/example/CacheKey.java", 41, 20)],
                [loc("src/main/java/com/example/SignatureCheck.java", 87, 12)],
                [loc("src/test/java/com/example/CacheKeyTest.java", 23, 18)],
            ],
        },
        "snippet_db": {snippet_key: {"ok": True, "id": snippet_db_id}},
    }


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)

    fixtures = build_engine_fixtures()
    (FIXTURES / "engine_fixtures.json").write_text(
        json.dumps(fixtures, indent=2) + "\n", encoding="utf-8"
    )

    engine = FakeEngine(fixtures)
    index = docs_mod.load_index(default_index_path())
    transport = RecordingTransport(ScriptedTransport(RESPONSES))
    session = Session(transport=transport, id="fixture-session")
    question = Question(goal=GOAL, schema=SCHEMA)
    db = DatabaseHandle(id=DB_ID, root="")
    report = pipeline.answer_question(
        question, db, engine, index, session, PipelineBudget()
    )
    assert report.outcome is Outcome.VALIDATED, report.outcome
    assert report.final_query.source == QUERY_FINAL
    assert len(report.table.rows) == 3

    save_cassette(FIXTURES / "cassette.jsonl", transport.entries)

    # Standalone cassette for the documentation-refinement loop.
    refine_transport = RecordingTransport(ScriptedTransport(RESPONSES[2:4]))
    refine_session = Session(transport=refine_transport, id="refine-session")
    keywords = [
        "identify", "method", "calls", "array1", "equals", "array2",
        "compare", "arrays",
    ]
    docs = docs_mod.refine_constructs(refine_session, index, keywords, rounds=3)
    assert [d.qualified_name for d in docs] == [
        "MethodCall",
        "MethodCall::getMethod",
        "MethodCall::getQualifier",
        "MethodCall::getArgument",
        "Array",
        "Array::getComponentType",
    ]
    save_cassette(FIXTURES / "refine_cassette.jsonl", refine_transport.entries)

    (FIXTURES / "config.json").write_text(
        json.dumps(
            {
                "engine": "fake",
                "engine_fixtures": "engine_fixtures.json",
                "mode": "replay",
                "cassette": "cassette.jsonl",
                "cache_dir": "cache",
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    (GOLDEN / "transcript.jsonl").write_bytes(
        pipeline.export_transcript(report.transcript)
    )
    (GOLDEN / "table.txt").write_text(
        results.render(report.table) + "\n", encoding="utf-8"
    )
    (GOLDEN / "table.csv").write_bytes(results.export_csv(report.table))
    (GOLDEN / "table.structured.jsonl").write_bytes(
        results.export_structured(report.table)
    )
    (GOLDEN / "table.sarif").write_bytes(results.export_sarif(report.table))

    print(f"wrote fixtures to {FIXTURES} and goldens to {GOLDEN}")
    print(f"LLM calls: {transport.entries and len(transport.entries)}")
    print(f"prompt bytes: {report.prompt_bytes_total}")


if __name__ == "__main__":
    main()
