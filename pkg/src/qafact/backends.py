"""Pluggable model backends: remote prompted LLMs, score endpoints, and
transcript replay.

All adapters speak one request shape so any live call can be recorded to a
JSONL transcript and replayed bit-for-bit later:

    {"op": "complete", "prompt": "..."}                      -> {"text": ..., "token_probs": {...}}
    {"op": "score", "premise": "...", "hypothesis": "..."}   -> {"score": 0.73}

Transcript lines are ``{"request": ..., "response": ..., "timestamp": ...}``;
replay keys on the canonical JSON of the request.
"""

from __future__ import annotations

import json
import math
import os
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional

import httpx
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import BackendMalformedError, BackendUnreachableError, ReplayMissError

BackendKind = Literal["prompted-llm", "score-endpoint", "replay"]


class ModelBackend(BaseModel):
    """Configuration for one judging or decomposition backend."""

    model_config = ConfigDict(frozen=True)

    name: str
    kind: BackendKind
    endpoint: str = ""
    auth: Optional[str] = None  # env var holding the bearer token
    request_timeout: float = 60.0
    transcript: Optional[str] = None  # replay source path
    prompt_template: Optional[str] = None
    model: Optional[str] = None  # model name sent to OpenAI-compatible endpoints
    parallelism: int = 4
    max_retries: int = 2

    @model_validator(mode="after")
    def _check_kind_fields(self) -> "ModelBackend":
        if self.kind == "replay" and not self.transcript:
            raise ValueError("replay backends require a transcript path")
        if self.kind == "prompted-llm" and not self.prompt_template:
            raise ValueError("prompted-llm backends require a prompt template id")
        if self.kind != "replay" and not self.endpoint:
            raise ValueError(f"{self.kind} backends require an endpoint URL")
        return self


def canonical_request_key(request: dict) -> str:
    return json.dumps(request, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":"))


class BackendAdapter:
    """Executes backend requests; one concrete adapter per backend kind."""

    def __init__(self, backend: ModelBackend):
        self.backend = backend

    def invoke(self, request: dict) -> dict:
        raise NotImplementedError


class HttpAdapter(BackendAdapter):
    """Shared HTTP plumbing: auth header, timeout, retry with backoff."""

    def __init__(self, backend: ModelBackend, client: Optional[httpx.Client] = None,
                 backoff_base: float = 0.5):
        super().__init__(backend)
        self._client = client or httpx.Client(timeout=backend.request_timeout)
        self._backoff_base = backoff_base

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.backend.auth:
            token = os.environ.get(self.backend.auth, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, payload: dict) -> dict:
        last_error: Optional[Exception] = None
        for attempt in range(self.backend.max_retries + 1):
            try:
                response = self._client.post(
                    self.backend.endpoint, json=payload, headers=self._headers()
                )
                response.raise_for_status()
                return response.json()
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_error = exc
                if attempt < self.backend.max_retries:
                    time.sleep(self._backoff_base * (2 ** attempt))
        raise BackendUnreachableError(
            f"backend {self.backend.name!r} unreachable after "
            f"{self.backend.max_retries + 1} attempts: {last_error}"
        )


class PromptedLLMAdapter(HttpAdapter):
    """OpenAI-compatible completion endpoint with optional top-logprobs."""

    def invoke(self, request: dict) -> dict:
        if request.get("op") != "complete":
            raise ValueError(f"prompted-llm backends only complete, got {request.get('op')!r}")
        payload = {
            "prompt": request["prompt"],
            "max_tokens": 16,
            "temperature": 0,
            "logprobs": 5,
        }
        if self.backend.model:
            payload["model"] = self.backend.model
        body = self._post(payload)
        try:
            choice = body["choices"][0]
            text = choice.get("text", "")
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendMalformedError(
                f"backend {self.backend.name!r} returned no choices",
                raw_output=json.dumps(body, ensure_ascii=False),
            ) from exc
        token_probs = None
        logprobs = choice.get("logprobs") or {}
        top = logprobs.get("top_logprobs") or []
        if top:
            token_probs = {
                token: math.exp(lp) for token, lp in top[0].items()
            }
        return {"text": text, "token_probs": token_probs}


class ScoreEndpointAdapter(HttpAdapter):
    """Generic score-emitting endpoint: POST {premise, hypothesis} -> {score}."""

    def invoke(self, request: dict) -> dict:
        if request.get("op") != "score":
            raise ValueError(f"score endpoints only score, got {request.get('op')!r}")
        body = self._post({
            "premise": request["premise"],
            "hypothesis": request["hypothesis"],
        })
        score = body.get("score") if isinstance(body, dict) else None
        if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
            raise BackendMalformedError(
                f"backend {self.backend.name!r} returned no score in [0, 1]",
                raw_output=json.dumps(body, ensure_ascii=False),
            )
        return {"score": float(score)}


class ReplayAdapter(BackendAdapter):
    """Replays a recorded transcript; deterministic by construction.

    A transcript entry whose response carries an ``error`` key re-raises
    the recorded failure, so partial-failure behaviour replays too.
    """

    def __init__(self, backend: ModelBackend):
        super().__init__(backend)
        self._responses: dict[str, dict] = {}
        path = Path(backend.transcript or "")
        if not path.exists():
            raise BackendUnreachableError(f"transcript not found: {path}")
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                key = canonical_request_key(entry["request"])
                self._responses[key] = entry["response"]

    def invoke(self, request: dict) -> dict:
        key = canonical_request_key(request)
        if key not in self._responses:
            raise ReplayMissError(
                f"transcript {self.backend.transcript!r} has no entry for request "
                f"(op={request.get('op')!r})"
            )
        response = self._responses[key]
        if isinstance(response, dict) and "error" in response:
            raise BackendUnreachableError(
                f"recorded failure: {response['error']}",
                raw_output=json.dumps(response, ensure_ascii=False),
            )
        return response


class RecordingAdapter(BackendAdapter):
    """Wraps a live adapter and appends every exchange to a transcript file."""

    def __init__(self, inner: BackendAdapter, transcript_path: str):
        super().__init__(inner.backend)
        self._inner = inner
        self._path = Path(transcript_path)
        self._path.parent.mkdir(parents=True, exist_ok=True)

    def invoke(self, request: dict) -> dict:
        response = self._inner.invoke(request)
        entry = {
            "request": request,
            "response": response,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with self._path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return response


def build_adapter(backend: ModelBackend,
                  client: Optional[httpx.Client] = None,
                  record_to: Optional[str] = None) -> BackendAdapter:
    """Construct the adapter for a backend config, optionally recording."""
    adapter: BackendAdapter
    if backend.kind == "replay":
        adapter = ReplayAdapter(backend)
    elif backend.kind == "prompted-llm":
        adapter = PromptedLLMAdapter(backend, client=client)
    elif backend.kind == "score-endpoint":
        adapter = ScoreEndpointAdapter(backend, client=client)
    else:  # pragma: no cover - kinds are closed by the Literal type
        raise ValueError(f"unknown backend kind {backend.kind!r}")
    if record_to:
        adapter = RecordingAdapter(adapter, record_to)
    return adapter


def write_transcript_entry(path: str | Path, request: dict, response: dict,
                           timestamp: Optional[str] = None) -> None:
    """Append one transcript line; used to prepare replay fixtures."""
    entry = {
        "request": request,
        "response": response,
        "timestamp": timestamp or datetime.now(timezone.utc).isoformat(),
    }
    with Path(path).open("a", encoding="utf-8") as handle:
        handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
