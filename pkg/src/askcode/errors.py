"""Exception hierarchy."""

from __future__ import annotations


class AskcodeError(Exception):
    pass


class EngineUnavailable(AskcodeError):
    """The query engine adapter cannot be reached or invoked."""


class ExecutionFailure(AskcodeError):
    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class SnippetBuildError(AskcodeError):
    def __init__(self, diagnostics, case_index: int | None = None):
        super().__init__("snippet database build failed")
        self.diagnostics = list(diagnostics)
        self.case_index = case_index


class SessionFailure(AskcodeError):
    """LLM transport exhausted its retries."""


class MalformedLLMOutput(AskcodeError):
    """The model response could not be parsed even after a reprompt."""


class CassetteMismatch(AskcodeError):
    """A replayed request does not match the recorded one."""


class UnscriptedFixture(AskcodeError):
    """The fixture-driven fake engine was asked about an unscripted input."""


class ParseError(AskcodeError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateConstruct(AskcodeError):
    pass


class SchemaMismatch(AskcodeError):
    def __init__(self, raw_arity: int, schema_arity: int):
        super().__init__(
            f"result has {raw_arity} columns but schema needs {schema_arity}"
        )
        self.raw_arity = raw_arity
        self.schema_arity = schema_arity


class NoLocationCell(AskcodeError):
    """A SARIF export row has no location cell to anchor the result."""
