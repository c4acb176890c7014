import pytest

from askcode.engine import (
    FakeEngine,
    extract_symbols,
    parse_diagnostics,
    snippets_digest,
    source_digest,
)
from askcode.errors import SnippetBuildError, UnscriptedFixture
from askcode.model import CandidateQuery, Location


def test_extract_symbols_class_name():
    assert extract_symbols("type ArrayType not found") == ["ArrayType"]


def test_extract_symbols_predicate_and_class():
    assert extract_symbols("no member getReceiver on MethodCall") == [
        "getReceiver",
        "MethodCall",
    ]


def test_extract_symbols_empty():
    assert extract_symbols("") == []


def test_extract_symbols_qualified_and_deduped():
    msg = "MethodCall::getReceiver missing; MethodCall::getReceiver again"
    assert extract_symbols(msg) == ["MethodCall::getReceiver"]


def test_parse_diagnostics_structured_line():
    diags = parse_diagnostics("query.ql:3:7: error: could not resolve ArrayType")
    assert diags[0].file == "query.ql"
    assert diags[0].line == 3
    assert diags[0].column == 7
    assert diags[0].severity == "error"
    assert "ArrayType" in diags[0].symbols


def test_parse_diagnostics_freeform_line_becomes_fileless():
    diags = parse_diagnostics("something about BadName broke")
    assert diags[0].file is None
    assert diags[0].line == 0
    assert diags[0].symbols == ("BadName",)


def test_fake_engine_empty_source_is_diagnostic_not_crash():
    engine = FakeEngine({})
    result = engine.compile(CandidateQuery(source="   "))
    assert not result.ok
    assert result.diagnostics


def test_fake_engine_unscripted_compile_fails_loudly():
    engine = FakeEngine({})
    with pytest.raises(UnscriptedFixture):
        engine.compile(CandidateQuery(source="select 1"))


def test_fake_engine_unscripted_execute_fails_loudly():
    source = "select 1"
    engine = FakeEngine({"compile": {source_digest(source): {"ok": True}}})
    result = engine.compile(CandidateQuery(source=source))
    with pytest.raises(UnscriptedFixture):
        engine.execute(result.artifact, _db("other"))


def _db(db_id):
    from askcode.engine import DatabaseHandle

    return DatabaseHandle(id=db_id, root="")


def test_fake_engine_scripted_roundtrip():
    source = "select 1"
    digest = source_digest(source)
    engine = FakeEngine(
        {
            "compile": {digest: {"ok": True}},
            "execute": {
                f"{digest}:db1": [
                    [{"type": "location", "file": "A.java", "line": 3, "column": 1}],
                ]
            },
        }
    )
    result = engine.compile(CandidateQuery(source=source))
    rows = engine.execute(result.artifact, _db("db1"))
    assert rows == [(Location(file="A.java", line=3, column=1),)]


def test_fake_engine_execute_deterministic():
    source = "select 1"
    digest = source_digest(source)
    engine = FakeEngine(
        {
            "compile": {digest: {"ok": True}},
            "execute": {f"{digest}:db1": [[{"type": "text", "value": "x"}]]},
        }
    )
    artifact = engine.compile(CandidateQuery(source=source)).artifact
    assert engine.execute(artifact, _db("db1")) == engine.execute(artifact, _db("db1"))


def test_fake_engine_snippet_build_two_files_one_handle():
    snippets = [("A.java", "class A {}"), ("B.java", "class B {}")]
    key = snippets_digest(snippets)
    engine = FakeEngine({"snippet_db": {key: {"ok": True, "id": "sdb"}}})
    handle = engine.build_snippet_database(snippets, "java")
    assert handle.id == "sdb"
    assert handle.origin == "snippet"


def test_fake_engine_snippet_build_error_carries_diagnostics():
    snippets = [("A.java", "class A {")]
    key = snippets_digest(snippets)
    engine = FakeEngine(
        {
            "snippet_db": {
                key: {"ok": False, "diagnostics": [{"message": "A.java: missing brace"}]}
            }
        }
    )
    with pytest.raises(SnippetBuildError) as info:
        engine.build_snippet_database(snippets, "java")
    assert len(info.value.diagnostics) == 1


def test_snippets_digest_order_sensitive():
    a = [("A.java", "x"), ("B.java", "y")]
    b = [("B.java", "y"), ("A.java", "x")]
    assert snippets_digest(a) != snippets_digest(b)
