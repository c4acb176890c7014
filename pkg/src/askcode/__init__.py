"""askcode: synthesize validated program-analysis queries from natural
language questions and run them over a codebase."""

from .bench import BenchmarkCase, Metrics, compute_metrics, overlap
from .docs import ConstructDoc, ConstructIndex, load_index, validate_constructs
from .engine import CodeQLAdapter, DatabaseHandle, FakeEngine
from .model import (
    AnswerReport,
    CandidateQuery,
    Location,
    Outcome,
    OutputSchema,
    PipelineBudget,
    Question,
    ResultTable,
    SelfTestCase,
)
from .pipeline import answer_question

__all__ = [
    "AnswerReport",
    "BenchmarkCase",
    "CandidateQuery",
    "CodeQLAdapter",
    "ConstructDoc",
    "ConstructIndex",
    "DatabaseHandle",
    "FakeEngine",
    "Location",
    "Metrics",
    "Outcome",
    "OutputSchema",
    "PipelineBudget",
    "Question",
    "ResultTable",
    "SelfTestCase",
    "answer_question",
    "compute_metrics",
    "load_index",
    "overlap",
    "validate_constructs",
]
