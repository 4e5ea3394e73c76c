"""Language-model clients.

Three implementations of one interface: a deterministic mock, a thin
HTTP completion client, and a transcript replayer. The transcript (one
JSON object per line, written by augment in call order) is the
serialization point: replaying it reproduces the original run byte for
byte, including recorded failures.
"""

from __future__ import annotations

import hashlib
import json
import urllib.request
from pathlib import Path
from typing import Protocol

from .errors import GenerationError, IoError, ReplayError

DEFAULT_MODEL = "qwen3-8b"
DEFAULT_MAX_NEW_TOKENS = 50
DEFAULT_TEMPERATURE = 0.7


class CompletionClient(Protocol):
    def complete(
        self, system: str, user: str, max_new_tokens: int, temperature: float
    ) -> str: ...


class MockClient:
    """Deterministic offline client.

    With a fixed `response` it echoes that string; otherwise it derives
    a short caption-like string from the prompt hash. `failures` makes
    the first N calls raise GenerationError, which exercises the
    retry/fallback path.
    """

    def __init__(self, response: str | None = None, failures: int = 0):
        self._response = response
        self._failures = failures
        self.calls = 0

    def complete(
        self, system: str, user: str, max_new_tokens: int, temperature: float
    ) -> str:
        self.calls += 1
        if self._failures > 0:
            self._failures -= 1
            raise GenerationError("mock failure")
        if self._response is not None:
            return self._response
        tag = hashlib.sha256((system + "\x00" + user).encode("utf-8")).hexdigest()[:8]
        return f"a person performs the connecting action ({tag})"


class HttpCompletionClient:
    """POSTs {model, system, user, max_new_tokens, temperature} as JSON
    and expects {"text": "..."} back. Any transport or payload problem
    is a GenerationError so the caller's retry policy applies."""

    def __init__(self, endpoint: str, model: str = DEFAULT_MODEL, timeout: float = 60.0, opener=None):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self._opener = opener or urllib.request.urlopen

    def complete(
        self, system: str, user: str, max_new_tokens: int, temperature: float
    ) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "system": system,
                "user": user,
                "max_new_tokens": max_new_tokens,
                "temperature": temperature,
            }
        ).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with self._opener(request, timeout=self.timeout) as resp:
                doc = json.load(resp)
        except GenerationError:
            raise
        except Exception as exc:
            raise GenerationError(f"completion request failed: {exc}") from exc
        text = doc.get("text") if isinstance(doc, dict) else None
        if not isinstance(text, str):
            raise GenerationError("completion response lacks a 'text' string")
        return text


def load_transcript(path: str | Path) -> list[dict]:
    records = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        for n, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayError(f"{path}:{n + 1}: invalid JSON: {exc}") from exc
            for key in ("system", "user", "response", "attempts", "fallback"):
                if key not in rec:
                    raise ReplayError(f"{path}:{n + 1}: missing {key!r}")
            records.append(rec)
    return records


class ReplayClient:
    """Replays a transcript in order.

    Each recorded pair made `attempts` calls; the replayer raises
    GenerationError for every call before the last, then returns the
    recorded response, or keeps failing when the record ended in the
    fallback. Prompt divergence raises ReplayError, which the retry
    loop deliberately does not catch.
    """

    def __init__(self, transcript_path: str | Path):
        self._records = load_transcript(transcript_path)
        self._cursor = 0
        self._calls = 0

    def complete(
        self, system: str, user: str, max_new_tokens: int, temperature: float
    ) -> str:
        if self._cursor >= len(self._records):
            raise ReplayError("transcript exhausted")
        rec = self._records[self._cursor]
        if system != rec["system"] or user != rec["user"]:
            raise ReplayError(
                f"prompt diverged from transcript at record {self._cursor}"
            )
        self._calls += 1
        if self._calls < int(rec["attempts"]):
            raise GenerationError("replayed failure")
        self._cursor += 1
        self._calls = 0
        if rec["fallback"]:
            raise GenerationError("replayed failure")
        return rec["response"]
