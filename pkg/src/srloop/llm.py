"""Chat-completion backends: a live OpenAI-compatible HTTP client and a
deterministic scripted backend for tests and replays, plus token/cost accounting.

Every call is stateless — one system message and one user message, never any
conversation history. Scripted transcripts are plain text files whose turns
are separated by a line containing only ``%%%``.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from pathlib import Path

import requests

TRANSCRIPT_DELIMITER = "%%%"

DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"


class BackendError(Exception):
    """Base class for completion failures."""


class TransportError(BackendError):
    """Network-level failure that survived all retries."""


class ApiError(BackendError):
    """Non-2xx HTTP response; carries status and body."""

    def __init__(self, status: int, body: str):
        super().__init__(f"API error {status}: {body[:500]}")
        self.status = status
        self.body = body


class TranscriptExhaustedError(BackendError):
    """The scripted transcript has no more turns."""


class UnknownModelError(KeyError):
    """No price entry for the model."""


@dataclass(frozen=True)
class ChatRequest:
    system: str
    user: str
    temperature: float = 0.7
    model: str = ""  # empty defers to the backend's configured model
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.system or not self.user:
            raise ValueError("system and user messages must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    backend_id: str


class ScriptedBackend:
    """Replays canned responses in order; the primary test vehicle.

    Token counts are whitespace-token estimates so accounting stays
    deterministic. Single-consumer: the cursor is sequential state.
    """

    def __init__(self, entries: list[str], name: str = "scripted"):
        self.entries = list(entries)
        self.cursor = 0
        self.name = name
        self.requests: list[ChatRequest] = []

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        text = Path(path).read_text()
        entries = [e.strip("\n") for e in _split_transcript(text)]
        return cls(entries, name=f"scripted:{Path(path).name}")

    def complete(self, req: ChatRequest) -> ChatResponse:
        self.requests.append(req)
        if self.cursor >= len(self.entries):
            raise TranscriptExhaustedError(
                f"transcript {self.name} exhausted after {len(self.entries)} turns"
            )
        text = self.entries[self.cursor]
        self.cursor += 1
        return ChatResponse(
            text=text,
            prompt_tokens=len(req.system.split()) + len(req.user.split()),
            completion_tokens=len(text.split()),
            backend_id=self.name,
        )


def _split_transcript(text: str) -> list[str]:
    entries: list[str] = []
    current: list[str] = []
    for line in text.splitlines():
        if line.strip() == TRANSCRIPT_DELIMITER:
            entries.append("\n".join(current))
            current = []
        else:
            current.append(line)
    if any(line.strip() for line in current):
        entries.append("\n".join(current))
    return entries


def write_transcript(entries: list[str], path) -> None:
    """Write turns in the transcript file format (delimiter line between turns)."""
    lines = []
    for entry in entries:
        lines.append(entry.rstrip("\n"))
        lines.append(TRANSCRIPT_DELIMITER)
    Path(path).write_text("\n".join(lines) + "\n")


class HttpBackend:
    """OpenAI-compatible chat-completions client.

    The API key is read from the environment at call time and never stored or
    logged. Transport failures are retried with exponential backoff; non-2xx
    responses surface immediately as ApiError.
    """

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        model: str = "gpt-4o",
        key_env_var: str = "OPENAI_API_KEY",
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint
        self.model = model
        self.key_env_var = key_env_var
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff

    def __repr__(self) -> str:
        return f"HttpBackend(endpoint={self.endpoint!r}, model={self.model!r})"

    def complete(self, req: ChatRequest) -> ChatResponse:
        key = os.environ.get(self.key_env_var)
        if not key:
            raise TransportError(f"API key environment variable {self.key_env_var} is not set")
        payload = {
            "model": req.model or self.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": req.temperature,
        }
        if req.max_tokens is not None:
            payload["max_tokens"] = req.max_tokens
        headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * 2**attempt)
                continue
            if resp.status_code // 100 != 2:
                raise ApiError(resp.status_code, resp.text)
            body = resp.json()
            usage = body.get("usage", {})
            return ChatResponse(
                text=body["choices"][0]["message"]["content"],
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                backend_id=f"http:{payload['model']}",
            )
        raise TransportError(f"request failed after {self.max_retries + 1} attempts: {last_exc}")


@dataclass
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def add(self, resp: ChatResponse) -> None:
        self.prompt_tokens += resp.prompt_tokens
        self.completion_tokens += resp.completion_tokens


def estimate_cost(usage: TokenUsage, model: str, price_table: dict[str, tuple[float, float]]) -> float:
    """Linear cost from per-token prompt/completion prices.

    ``price_table`` maps model name to (prompt price per token, completion
    price per token). Raises UnknownModelError when the model has no entry.
    """
    if model not in price_table:
        raise UnknownModelError(model)
    prompt_price, completion_price = price_table[model]
    return usage.prompt_tokens * prompt_price + usage.completion_tokens * completion_price
