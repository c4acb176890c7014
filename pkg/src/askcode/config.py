"""Tool configuration: adapters, budgets, transport mode, paths."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .model import PipelineBudget

MODES = ("live", "record", "replay")


def default_index_path() -> Path:
    return Path(resources.files("askcode") / "data" / "constructs_java_mini.jsonl")


@dataclass
class Config:
    engine: str = "fake"  # "fake" or "codeql"
    engine_fixtures: str | None = None
    codeql_path: str = "codeql"
    docs_index: str | None = None  # None = packaged miniature index
    mode: str = "replay"
    cassette: str | None = None
    llm_endpoint: str = "https://api.openai.com/v1/chat/completions"
    llm_model: str = "gpt-4o"
    credential_env: str = "ASKCODE_API_KEY"
    cache_dir: str = str(Path.home() / ".cache" / "askcode")
    budget: PipelineBudget = field(default_factory=PipelineBudget)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "replay" and not self.cassette:
            raise ValueError("replay mode requires a cassette path")
        if self.engine == "fake" and not self.engine_fixtures:
            raise ValueError("fake engine requires an engine_fixtures path")

    @property
    def index_path(self) -> Path:
        return Path(self.docs_index) if self.docs_index else default_index_path()


def load_config(path: str | Path, **overrides) -> Config:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    budget = PipelineBudget(**raw.pop("budget", {}))
    raw.update({k: v for k, v in overrides.items() if v is not None})

    base = Path(path).resolve().parent

    def resolve(key: str) -> None:
        value = raw.get(key)
        if value and not Path(value).is_absolute():
            raw[key] = str(base / value)

    for key in ("engine_fixtures", "docs_index", "cassette", "cache_dir"):
        resolve(key)
    return Config(budget=budget, **raw)
