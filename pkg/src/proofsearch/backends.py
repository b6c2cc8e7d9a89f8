"""Suggestion backends: remote chat API, transcript replay, and scripted mock.

All backends expose one operation, ``complete(prompt) -> SuggestionResponse``.
Only a delivered response counts as a consultation; transport retries happen
inside ``complete`` and are invisible to the caller's query accounting.

Transcripts are JSON-lines files of ``{"index", "prompt_sha256", "response"}``
records, written in record mode and consumed positionally in replay mode; the
digest is verified on replay so a drifted prompt fails loudly instead of
silently desynchronizing.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .parsing import SuggestionResponse
from .prompting import PromptBundle

BACKEND_KINDS = ("remote", "replay", "scripted")
DEFAULT_API_KEY_ENV = "PROOFSEARCH_API_KEY"


class BackendError(Exception):
    """A suggestion backend could not deliver a response."""


class TransportError(BackendError):
    """Remote endpoint unreachable after the configured retries."""


class ScriptEntryMissing(BackendError):
    """The scripted table has no (remaining) entry for the requested state."""


class TranscriptExhausted(BackendError):
    """Replay requested more responses than the transcript holds."""


class TranscriptMismatch(BackendError):
    """A replayed prompt's digest differs from the recorded one."""


@dataclass
class BackendConfig:
    """Configuration for a suggestion backend.

    ``script`` values may be a single response text (returned on every query
    at that state) or a list of texts consumed one per query. ``record_path``
    can be combined with any kind to write a transcript of the session.
    """

    kind: str = "remote"
    endpoint: str = ""
    model: str = ""
    api_key_env: str = DEFAULT_API_KEY_ENV
    transcript_path: str | Path | None = None
    record_path: str | Path | None = None
    script: dict[str, str | list[str]] | None = None
    temperature: float = 0.0
    max_retries: int = 3
    retry_backoff: float = 1.0
    request_timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind: {self.kind!r}")
        if self.kind == "replay" and self.transcript_path is None:
            raise ValueError("replay backend requires a transcript path")
        if self.kind == "scripted" and self.script is None:
            raise ValueError("scripted backend requires a script table")


class Backend(Protocol):
    def complete(self, prompt: PromptBundle) -> SuggestionResponse: ...


def prompt_digest(prompt: PromptBundle) -> str:
    payload = prompt.system_text + "\x00" + prompt.user_text + "\x00" + prompt.agent_mode
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ScriptedBackend:
    """Deterministic mock keyed by the canonical form of the prompted state.

    Prompts received are kept for test inspection in ``seen_prompts``.
    """

    def __init__(self, script: dict[str, str | list[str]]):
        self._script = {k: list(v) if isinstance(v, list) else v for k, v in script.items()}
        self._cursor: dict[str, int] = {}
        self.seen_prompts: list[PromptBundle] = []

    def complete(self, prompt: PromptBundle) -> SuggestionResponse:
        self.seen_prompts.append(prompt)
        key = prompt.state_key
        if key not in self._script:
            raise ScriptEntryMissing(f"no scripted response for state key {key!r}")
        entry = self._script[key]
        if isinstance(entry, str):
            raw = entry
        else:
            pos = self._cursor.get(key, 0)
            if pos >= len(entry):
                raise ScriptEntryMissing(
                    f"scripted responses for state key {key!r} exhausted after {pos}"
                )
            raw = entry[pos]
            self._cursor[key] = pos + 1
        return SuggestionResponse.from_raw(raw, prompt.agent_mode)


class ReplayBackend:
    """Replays a recorded transcript positionally, verifying prompt digests."""

    def __init__(self, transcript_path: str | Path):
        self._records = read_transcript(transcript_path)
        self._pos = 0
        self._path = str(transcript_path)

    def complete(self, prompt: PromptBundle) -> SuggestionResponse:
        if self._pos >= len(self._records):
            raise TranscriptExhausted(
                f"transcript {self._path} exhausted after {self._pos} responses"
            )
        record = self._records[self._pos]
        digest = prompt_digest(prompt)
        if record.get("prompt_sha256") and record["prompt_sha256"] != digest:
            raise TranscriptMismatch(
                f"transcript {self._path} record {self._pos}: prompt digest "
                f"{digest} does not match recorded {record['prompt_sha256']}"
            )
        self._pos += 1
        return SuggestionResponse.from_raw(record["response"], prompt.agent_mode)


class RemoteBackend:
    """Chat-completion style HTTP backend.

    The API credential is read from the environment variable named by the
    config (never from the command line). Transport failures are retried
    with exponential backoff; an undelivered response surfaces as
    TransportError.
    """

    def __init__(self, config: BackendConfig):
        if not config.endpoint:
            raise ValueError("remote backend requires an endpoint")
        self._config = config

    def complete(self, prompt: PromptBundle) -> SuggestionResponse:
        cfg = self._config
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(cfg.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": cfg.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": cfg.temperature,
        }
        last_exc: Exception | None = None
        for attempt in range(cfg.max_retries):
            if attempt:
                time.sleep(cfg.retry_backoff * 2 ** (attempt - 1))
            try:
                resp = requests.post(
                    cfg.endpoint, json=payload, headers=headers, timeout=cfg.request_timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if resp.status_code >= 500:
                last_exc = TransportError(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendError(f"backend rejected request: {resp.status_code} {resp.text!r}")
            try:
                raw = resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise BackendError(f"malformed backend response: {exc}") from exc
            return SuggestionResponse.from_raw(raw, prompt.agent_mode)
        raise TransportError(f"backend unreachable after {cfg.max_retries} attempts: {last_exc}")


@dataclass
class RecordingBackend:
    """Wraps another backend and appends each delivered response to a transcript."""

    inner: Backend
    path: str | Path
    _index: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        Path(self.path).write_text("", encoding="utf-8")

    def complete(self, prompt: PromptBundle) -> SuggestionResponse:
        resp = self.inner.complete(prompt)
        record = {
            "index": self._index,
            "prompt_sha256": prompt_digest(prompt),
            "response": resp.raw_text,
        }
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._index += 1
        return resp


def read_transcript(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def make_backend(config: BackendConfig) -> Backend:
    """Materialize a backend instance from its configuration.

    Replay and scripted backends hold per-search state, so make a fresh one
    per search.
    """
    backend: Backend
    if config.kind == "scripted":
        backend = ScriptedBackend(config.script or {})
    elif config.kind == "replay":
        assert config.transcript_path is not None
        backend = ReplayBackend(config.transcript_path)
    else:
        backend = RemoteBackend(config)
    if config.record_path is not None:
        backend = RecordingBackend(backend, config.record_path)
    return backend
