"""Per-stage prompt construction and response parsing."""

from __future__ import annotations

import re

from .errors import MalformedLLMOutput
from .llm import PromptTemplate, Session
from .model import (
    CandidateQuery,
    Expectation,
    Question,
    QueryKind,
    ResultTable,
    SelfTestCase,
    Stage,
)

# Rows of an assistive-query result fed back to the model are capped to keep
# the context bounded.
ASSIST_FEEDBACK_ROW_CAP = 50

TEMPLATES: dict[Stage, PromptTemplate] = {
    Stage.SELFTEST_GEN: PromptTemplate(
        Stage.SELFTEST_GEN,
        "You are helping build a static analyzer for {language} code.\n"
        "Goal: {goal}\n"
        "Desired output table: {schema}\n\n"
        "Write one or more small, self-contained {language} source files that a\n"
        "correct analyzer for this goal would flag. Put each file in its own\n"
        "fenced code block and make sure the files compile on their own.",
    ),
    Stage.KEYWORD_EXTRACT: PromptTemplate(
        Stage.KEYWORD_EXTRACT,
        "Question: {goal}\n\n"
        "List the keywords in this question that are relevant for choosing\n"
        "analysis-library constructs. Reply with a comma-separated list only.",
    ),
    Stage.CONSTRUCT_PROPOSE: PromptTemplate(
        Stage.CONSTRUCT_PROPOSE,
        "Keywords: {keywords}\n{feedback}"
        "Name the standard-library classes and predicates of the analysis\n"
        "language that correspond to these keywords. Use the form Class or\n"
        "Class::predicate, one per line or comma-separated. Reply 'none' if\n"
        "nothing applies.",
    ),
    Stage.QUERY_GEN: PromptTemplate(
        Stage.QUERY_GEN,
        "Goal: {goal}\n"
        "Output table: {schema}\n\n"
        "Relevant library documentation:\n{docs}\n\n"
        "Test files the query should flag:\n{tests}\n\n"
        "Write an analysis query for this goal. Reply with the query in a\n"
        "single fenced code block.",
    ),
    Stage.REPAIR: PromptTemplate(
        Stage.REPAIR,
        "The query failed to compile:\n{diagnostics}\n\n"
        "Documentation for the constructs involved:\n{docs}\n\n"
        "Revise the query so it compiles. Reply with the full revised query\n"
        "in a single fenced code block.",
    ),
    Stage.ASSIST_PROPOSE: PromptTemplate(
        Stage.ASSIST_PROPOSE,
        "The current query compiles but produced {observed} rows on the test\n"
        "files, which does not satisfy the tests.\n"
        "Current query:\n{query}\n\n"
        "Propose a deliberately permissive diagnostic query whose output will\n"
        "help diagnose and fix the problem, like a print statement. Reply with\n"
        "the diagnostic query in a single fenced code block.",
    ),
    Stage.ASSIST_RUN: PromptTemplate(
        Stage.ASSIST_RUN,
        "The diagnostic query returned:\n{table}\n\n"
        "Using this evidence, revise the original query so it satisfies the\n"
        "tests. Reply with the full revised query in a single fenced code\n"
        "block.",
    ),
}

REPROMPT = (
    "Your previous response could not be parsed. {hint} "
    "Please answer again in exactly that form."
)

_CODE_BLOCK = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_CONSTRUCT_NAME = re.compile(
    r"^[A-Za-z_][A-Za-z0-9_]*(::[A-Za-z_][A-Za-z0-9_]*)?$"
)


def extract_code_blocks(text: str) -> list[str]:
    return [m.group(1).strip("\n") for m in _CODE_BLOCK.finditer(text)]


def parse_keywords(text: str) -> list[str]:
    items = []
    for chunk in re.split(r"[,\n]", text):
        word = chunk.strip().strip("\"'`*-•. \t")
        if word and word not in items:
            items.append(word)
    return items


def parse_construct_names(text: str) -> list[str]:
    stripped = text.strip().strip("`\"'. ")
    if stripped.lower() == "none":
        return []
    names = []
    for chunk in re.split(r"[,\n]", text):
        token = chunk.strip().strip("\"'`*-•. \t")
        if token and _CONSTRUCT_NAME.match(token) and token not in names:
            names.append(token)
    return names


def _schema_text(q: Question) -> str:
    return "; ".join(f"{name}: {desc}" for name, desc in q.schema.columns)


def _ask(session: Session, stage: Stage, prompt: str, parse, hint: str):
    """One call with a single automatic reprompt on unparseable output."""
    response = session.send(stage, prompt)
    parsed = parse(response)
    if parsed is not None:
        return parsed
    response = session.send(stage, REPROMPT.format(hint=hint))
    parsed = parse(response)
    if parsed is None:
        raise MalformedLLMOutput(f"unparseable response at stage {stage.value}")
    return parsed


def generate_selftests(session: Session, q: Question) -> list[SelfTestCase]:
    prompt = TEMPLATES[Stage.SELFTEST_GEN].render(
        language=q.analyzed_language.value,
        goal=q.goal,
        schema=_schema_text(q),
    )
    blocks = _ask(
        session,
        Stage.SELFTEST_GEN,
        prompt,
        lambda text: extract_code_blocks(text) or None,
        "Reply with at least one fenced code block.",
    )
    return [
        SelfTestCase(filename=f"Test{i + 1}.java", source=src, expectation=Expectation())
        for i, src in enumerate(blocks)
    ]


def extract_keywords(session: Session, q: Question) -> list[str]:
    prompt = TEMPLATES[Stage.KEYWORD_EXTRACT].render(goal=q.goal)
    return _ask(
        session,
        Stage.KEYWORD_EXTRACT,
        prompt,
        lambda text: parse_keywords(text) or None,
        "Reply with a comma-separated list of keywords.",
    )


def propose_constructs(
    session: Session, keywords: list[str], invalid_feedback: list[str]
) -> list[str]:
    feedback = ""
    if invalid_feedback:
        feedback = (
            "These previously proposed names do not exist in the library: "
            + ", ".join(invalid_feedback)
            + ".\n"
        )
    prompt = TEMPLATES[Stage.CONSTRUCT_PROPOSE].render(
        keywords=", ".join(keywords), feedback=feedback
    )

    def parse(text: str):
        stripped = text.strip().strip("`\"'. ")
        if stripped.lower() == "none":
            return []
        return parse_construct_names(text) or None

    return _ask(
        session,
        Stage.CONSTRUCT_PROPOSE,
        prompt,
        parse,
        "Reply with construct names of the form Class or Class::predicate.",
    )


def _single_query(session: Session, stage: Stage, prompt: str, kind: QueryKind) -> CandidateQuery:
    blocks = _ask(
        session,
        stage,
        prompt,
        lambda text: extract_code_blocks(text) or None,
        "Reply with the query in a single fenced code block.",
    )
    return CandidateQuery(source=blocks[0], kind=kind)


def generate_query(
    session: Session, q: Question, docs_text: str, tests: list[SelfTestCase]
) -> CandidateQuery:
    tests_text = "\n\n".join(f"// {t.filename}\n{t.source}" for t in tests)
    prompt = TEMPLATES[Stage.QUERY_GEN].render(
        goal=q.goal,
        schema=_schema_text(q),
        docs=docs_text or "(none)",
        tests=tests_text,
    )
    return _single_query(session, Stage.QUERY_GEN, prompt, QueryKind.ANSWER)


def repair_query(
    session: Session, diagnostics_text: str, docs_text: str
) -> CandidateQuery:
    prompt = TEMPLATES[Stage.REPAIR].render(
        diagnostics=diagnostics_text, docs=docs_text or "(none)"
    )
    return _single_query(session, Stage.REPAIR, prompt, QueryKind.ANSWER)


def propose_assistive_query(
    session: Session, current: CandidateQuery, observed_rows: int
) -> CandidateQuery:
    prompt = TEMPLATES[Stage.ASSIST_PROPOSE].render(
        query=current.source, observed=str(observed_rows)
    )
    return _single_query(session, Stage.ASSIST_PROPOSE, prompt, QueryKind.ASSISTIVE)


def feed_assistive_results(session: Session, table: ResultTable) -> CandidateQuery:
    from .results import render

    capped = table
    if len(table.rows) > ASSIST_FEEDBACK_ROW_CAP:
        capped = ResultTable(table.schema, table.rows[:ASSIST_FEEDBACK_ROW_CAP])
    prompt = TEMPLATES[Stage.ASSIST_RUN].render(table=render(capped))
    return _single_query(session, Stage.ASSIST_RUN, prompt, QueryKind.ANSWER)
