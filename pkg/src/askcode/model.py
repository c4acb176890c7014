"""Core value types shared across the pipeline."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class AnalyzedLanguage(enum.Enum):
    JAVA = "java"


class QueryStatus(enum.Enum):
    DRAFT = "draft"
    COMPILED = "compiled"
    SELF_TEST_PASSED = "self_test_passed"
    FINAL = "final"


class QueryKind(enum.Enum):
    ANSWER = "answer"
    ASSISTIVE = "assistive"


class Stage(enum.Enum):
    SELFTEST_GEN = "selftest_gen"
    KEYWORD_EXTRACT = "keyword_extract"
    CONSTRUCT_PROPOSE = "construct_propose"
    CONSTRUCT_VALIDATE = "construct_validate"
    QUERY_GEN = "query_gen"
    COMPILE = "compile"
    REPAIR = "repair"
    SELFTEST_RUN = "selftest_run"
    ASSIST_PROPOSE = "assist_propose"
    ASSIST_RUN = "assist_run"
    FINAL_RUN = "final_run"


class Outcome(enum.Enum):
    VALIDATED = "validated"
    BUDGET_EXHAUSTED_BEST_EFFORT = "budget_exhausted_best_effort"
    FAILED = "failed"


@dataclass(frozen=True)
class OutputSchema:
    """Column layout of the answer table: (name, description) pairs."""

    columns: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.columns:
            raise ValueError("schema must have at least one column")
        names = [name for name, _ in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("schema column names must be unique")

    @property
    def arity(self) -> int:
        return len(self.columns)

    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]


@dataclass(frozen=True)
class Question:
    goal: str
    schema: OutputSchema
    analyzed_language: AnalyzedLanguage = AnalyzedLanguage.JAVA

    def __post_init__(self) -> None:
        if not self.goal.strip():
            raise ValueError("question goal must be non-empty")


@dataclass(frozen=True)
class PipelineBudget:
    doc_refinement_rounds: int = 3
    compile_repair_rounds: int = 5
    assist_rounds: int = 3
    snippet_repair_rounds: int = 2

    def __post_init__(self) -> None:
        for name in (
            "doc_refinement_rounds",
            "compile_repair_rounds",
            "assist_rounds",
            "snippet_repair_rounds",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class Location:
    """Source location; file paths are repo-relative."""

    file: str
    line: int
    column: int = 0
    end_line: int | None = None
    end_column: int | None = None

    def __post_init__(self) -> None:
        if self.line < 1:
            raise ValueError("line must be >= 1")
        if self.column < 0:
            raise ValueError("column must be >= 0")
        if self.end_line is not None and self.end_line < self.line:
            raise ValueError("end_line must be >= line")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


# A result cell is either a grounded source location or plain text.
Cell = Location | str


@dataclass(frozen=True)
class Diagnostic:
    message: str
    severity: str = "error"
    file: str | None = None
    line: int = 0
    column: int = 0
    symbols: tuple[str, ...] = ()


@dataclass
class CandidateQuery:
    source: str
    status: QueryStatus = QueryStatus.DRAFT
    kind: QueryKind = QueryKind.ANSWER
    diagnostics: list[Diagnostic] = field(default_factory=list)


class ExpectationKind(enum.Enum):
    NON_EMPTY = "non_empty"
    EXACT_ROW_COUNT = "exact_row_count"
    CONTAINS_LOCATIONS = "contains_locations"


@dataclass(frozen=True)
class Expectation:
    kind: ExpectationKind = ExpectationKind.NON_EMPTY
    row_count: int | None = None
    locations: tuple[Location, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is ExpectationKind.EXACT_ROW_COUNT:
            if self.row_count is None or self.row_count < 1:
                raise ValueError("exact_row_count expectation needs row_count >= 1")
        if self.kind is ExpectationKind.CONTAINS_LOCATIONS and not self.locations:
            raise ValueError("contains_locations expectation needs locations")


@dataclass(frozen=True)
class SelfTestCase:
    filename: str
    source: str
    expectation: Expectation = Expectation()
    note: str = ""


@dataclass(frozen=True)
class PipelineEvent:
    stage: Stage
    digest: str
    ts: int


@dataclass
class ResultTable:
    schema: OutputSchema
    rows: list[tuple[Cell, ...]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != self.schema.arity:
                raise ValueError(
                    f"row arity {len(row)} does not match schema arity {self.schema.arity}"
                )


@dataclass
class AnswerReport:
    outcome: Outcome
    final_query: CandidateQuery | None
    table: ResultTable | None
    transcript: list[PipelineEvent]
    prompt_bytes_total: int
    session_id: str
    provenance: str = "pipeline"
