"""LLM session bookkeeping and the live / record / replay transport stack."""

from __future__ import annotations

import hashlib
import json
import os
import string
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import CassetteMismatch, SessionFailure
from .model import Stage


def request_digest(stage: Stage, prompt: str) -> str:
    """Stable digest of a rendered prompt, used for cassette matching.

    Any change to the prompt text, even whitespace, changes the digest and
    invalidates cassettes on purpose.
    """
    h = hashlib.sha256()
    h.update(stage.value.encode("utf-8"))
    h.update(b"\x00")
    h.update(prompt.encode("utf-8"))
    return h.hexdigest()


@dataclass(frozen=True)
class PromptTemplate:
    stage: Stage
    text: str

    def render(self, **values: str) -> str:
        fields = {
            name
            for _, name, _, _ in string.Formatter().parse(self.text)
            if name is not None
        }
        missing = fields - values.keys()
        if missing:
            raise ValueError(f"unfilled placeholders: {sorted(missing)}")
        unknown = values.keys() - fields
        if unknown:
            raise ValueError(f"unknown placeholders: {sorted(unknown)}")
        return self.text.format(**values)


@dataclass
class Session:
    """One conversation with the model; shared by every stage of a run."""

    transport: "Transport"
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    messages: list[tuple[str, str]] = field(default_factory=list)
    bytes_sent: int = 0

    def send(self, stage: Stage, prompt: str) -> str:
        self.messages.append(("user", prompt))
        self.bytes_sent += len(prompt.encode("utf-8"))
        reply = self.transport.send(self.id, stage, prompt)
        self.messages.append(("assistant", reply))
        return reply


class Transport(Protocol):
    def send(self, session_id: str, stage: Stage, prompt: str) -> str: ...


@dataclass(frozen=True)
class CassetteEntry:
    digest: str
    stage: str
    request: str
    response: str


def load_cassette(path: str | Path) -> list[CassetteEntry]:
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        entries.append(
            CassetteEntry(rec["digest"], rec["stage"], rec["request"], rec["response"])
        )
    return entries


def save_cassette(path: str | Path, entries: list[CassetteEntry]) -> None:
    lines = [
        json.dumps(
            {
                "digest": e.digest,
                "stage": e.stage,
                "request": e.request,
                "response": e.response,
            }
        )
        for e in entries
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


class ReplayTransport:
    """Serves recorded responses in order; any drift from the recording fails."""

    def __init__(self, entries: list[CassetteEntry]):
        self._entries = list(entries)
        self._cursor = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayTransport":
        return cls(load_cassette(path))

    @property
    def calls(self) -> int:
        return self._cursor

    def send(self, session_id: str, stage: Stage, prompt: str) -> str:
        if self._cursor >= len(self._entries):
            raise CassetteMismatch(
                f"cassette exhausted at call {self._cursor} (stage {stage.value})"
            )
        entry = self._entries[self._cursor]
        digest = request_digest(stage, prompt)
        if digest != entry.digest:
            raise CassetteMismatch(
                f"call {self._cursor}: expected digest {entry.digest[:12]} "
                f"({entry.stage}), got {digest[:12]} ({stage.value})"
            )
        self._cursor += 1
        return entry.response


class RecordingTransport:
    """Wraps another transport and logs every exchange as a cassette entry."""

    def __init__(self, inner: Transport):
        self._inner = inner
        self.entries: list[CassetteEntry] = []

    def send(self, session_id: str, stage: Stage, prompt: str) -> str:
        response = self._inner.send(session_id, stage, prompt)
        self.entries.append(
            CassetteEntry(request_digest(stage, prompt), stage.value, prompt, response)
        )
        return response

    def save(self, path: str | Path) -> None:
        save_cassette(path, self.entries)


class ScriptedTransport:
    """Returns a fixed response sequence; used for fixtures and fuzzing."""

    def __init__(self, responses: list[str]):
        self._responses = list(responses)
        self.calls = 0

    def send(self, session_id: str, stage: Stage, prompt: str) -> str:
        if self.calls >= len(self._responses):
            raise SessionFailure(f"scripted transport exhausted after {self.calls} calls")
        response = self._responses[self.calls]
        self.calls += 1
        return response


class FunctionTransport:
    """Delegates to a callable (stage, prompt) -> response."""

    def __init__(self, fn: Callable[[Stage, str], str]):
        self._fn = fn
        self.calls = 0

    def send(self, session_id: str, stage: Stage, prompt: str) -> str:
        self.calls += 1
        return self._fn(stage, prompt)


class HttpTransport:
    """Chat-completions style HTTP transport for live mode.

    The credential is read from the environment variable named by
    ``credential_env`` and sent as a bearer token.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        credential_env: str = "ASKCODE_API_KEY",
        timeout: float = 120.0,
        retries: int = 2,
    ):
        self.endpoint = endpoint
        self.model = model
        self.credential_env = credential_env
        self.timeout = timeout
        self.retries = retries
        self._history: list[dict] = []

    def send(self, session_id: str, stage: Stage, prompt: str) -> str:
        key = os.environ.get(self.credential_env)
        if not key:
            raise SessionFailure(f"missing credential in ${self.credential_env}")
        self._history.append({"role": "user", "content": prompt})
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = httpx.post(
                    self.endpoint,
                    json={"model": self.model, "messages": self._history},
                    headers={"Authorization": f"Bearer {key}"},
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                content = resp.json()["choices"][0]["message"]["content"]
                self._history.append({"role": "assistant", "content": content})
                return content
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
        raise SessionFailure(f"LLM transport failed: {last_error}")
