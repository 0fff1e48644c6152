"""Uniform interface to text-generation backends.

Remote chat-completion HTTP endpoints do the real work; scripted and
record/replay backends make every other layer testable without a model.
All backends expose one method, ``complete(messages, params) -> str``,
and must tolerate concurrent callers.  Call sequencing policy (AI calls
one at a time) belongs to the engine, not here.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import (
    ConfigurationError,
    DegradedOutputError,
    ReplayMissError,
    TransportError,
)

API_KEY_ENV = "SANDTABLE_API_KEY"

# Stated defaults: randomized output for run-to-run variety, overridable
# per agent.
DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 1024


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ConfigurationError(f"unknown chat role: {self.role!r}")
        if self.role in ("system", "user") and not self.content:
            raise ConfigurationError(f"{self.role} message content must be non-empty")

    def to_json(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    seed: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigurationError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens <= 0:
            raise ConfigurationError(f"max_tokens must be > 0, got {self.max_tokens}")

    def to_json(self) -> dict:
        return {"temperature": self.temperature, "max_tokens": self.max_tokens, "seed": self.seed}


def request_hash(messages: list[ChatMessage], params: SamplingParams) -> str:
    """Stable key for record/replay: sha256 over the canonical request."""
    canonical = json.dumps(
        {"messages": [m.to_json() for m in messages], "params": params.to_json()},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Backend:
    """Base class; subclasses implement _complete."""

    def complete(self, messages: list[ChatMessage], params: SamplingParams) -> str:
        if not messages:
            raise ConfigurationError("messages must be non-empty")
        text = self._complete(messages, params)
        if not text or not text.strip():
            raise DegradedOutputError("backend returned an empty completion", raw_text=text)
        return text

    def _complete(self, messages: list[ChatMessage], params: SamplingParams) -> str:
        raise NotImplementedError


class HttpChatBackend(Backend):
    """Any HTTP endpoint speaking the de-facto chat-completions JSON shape.

    Transient transport failures are retried with exponential backoff; the
    last failure is surfaced as TransportError.  The API key, if any, is
    read from the SANDTABLE_API_KEY environment variable.
    """

    def __init__(
        self,
        endpoint: str,
        model_name: str,
        timeout: float = 120.0,
        retries: int = 3,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint
        self.model_name = model_name
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def _complete(self, messages: list[ChatMessage], params: SamplingParams) -> str:
        payload: dict = {
            "model": self.model_name,
            "messages": [m.to_json() for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.seed is not None:
            payload["seed"] = params.seed
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                response = httpx.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
                if response.status_code >= 500:
                    raise TransportError(f"server error {response.status_code}")
                if response.status_code != 200:
                    raise ConfigurationError(
                        f"backend rejected request ({response.status_code}): {response.text[:500]}"
                    )
                doc = response.json()
                return doc["choices"][0]["message"]["content"]
            except (httpx.TransportError, httpx.TimeoutException, TransportError) as exc:
                last_error = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * (2**attempt))
            except (KeyError, IndexError, ValueError) as exc:
                raise DegradedOutputError(
                    f"malformed completion response: {exc}", raw_text=response.text[:2000]
                )
        raise TransportError(f"backend unreachable after {self.retries} attempts: {last_error}")


class ScriptedBackend(Backend):
    """Deterministic stand-in for a model.

    Three modes:
      ordered  -- consume a response list front to back (suits linear games);
                  exhausting the script is a configuration error
      pattern  -- first map key found as a substring of the rendered prompt
                  wins (suits concurrent interleavings); "" acts as catch-all
      sampled  -- pick from the list with an RNG seeded by the call's seed
                  and request hash, so output is a pure function of inputs
                  yet varies across seeds

    Every call is logged in ``calls`` for prompt-capture assertions.
    """

    def __init__(self, script: list[str] | dict[str, str], mode: str | None = None):
        if mode is None:
            mode = "pattern" if isinstance(script, dict) else "ordered"
        if mode not in ("ordered", "pattern", "sampled"):
            raise ConfigurationError(f"unknown scripted mode: {mode!r}")
        if mode == "pattern" and not isinstance(script, dict):
            raise ConfigurationError("pattern mode needs a pattern -> response map")
        if mode in ("ordered", "sampled") and not isinstance(script, list):
            raise ConfigurationError(f"{mode} mode needs a response list")
        if not script:
            raise ConfigurationError("script must be non-empty")
        self.mode = mode
        self.script = script
        self.calls: list[tuple[tuple[ChatMessage, ...], SamplingParams]] = []
        self._cursor = 0
        self._lock = threading.Lock()

    def _complete(self, messages: list[ChatMessage], params: SamplingParams) -> str:
        with self._lock:
            self.calls.append((tuple(messages), params))
            if self.mode == "ordered":
                if self._cursor >= len(self.script):
                    raise ConfigurationError(
                        f"ordered script exhausted after {len(self.script)} responses"
                    )
                text = self.script[self._cursor]
                self._cursor += 1
                return text
            if self.mode == "pattern":
                prompt = "\n".join(m.content for m in messages)
                for pattern, response in self.script.items():
                    if pattern in prompt:
                        return response
                raise ConfigurationError(
                    f"no script pattern matches prompt starting {prompt[:80]!r}"
                )
            rng = random.Random(f"{params.seed}:{request_hash(messages, params)}")
            return self.script[rng.randrange(len(self.script))]


class ReplayBackend(Backend):
    """Replays a recording file; misses are explicit errors.

    Identical requests recorded more than once replay in recording order.
    """

    def __init__(self, recording_path: str | Path):
        self.recording_path = Path(recording_path)
        self._queues: dict[str, list[str]] = {}
        self._lock = threading.Lock()
        if not self.recording_path.exists():
            raise ConfigurationError(f"recording file not found: {recording_path}")
        with open(self.recording_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                doc = json.loads(line)
                self._queues.setdefault(doc["request_hash"], []).append(doc["response"])

    def _complete(self, messages: list[ChatMessage], params: SamplingParams) -> str:
        key = request_hash(messages, params)
        with self._lock:
            queue = self._queues.get(key)
            if not queue:
                raise ReplayMissError(key)
            return queue.pop(0)


class RecordingBackend(Backend):
    """Wraps another backend and appends every exchange to a JSONL file."""

    def __init__(self, inner: Backend, recording_path: str | Path):
        self.inner = inner
        self.recording_path = Path(recording_path)
        self.recording_path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        # Fail now, not mid-game, if the path is unwritable.
        with open(self.recording_path, "a", encoding="utf-8"):
            pass

    def _complete(self, messages: list[ChatMessage], params: SamplingParams) -> str:
        text = self.inner.complete(messages, params)
        exchange = {
            "request_hash": request_hash(messages, params),
            "messages": [m.to_json() for m in messages],
            "params": params.to_json(),
            "response": text,
        }
        with self._lock:
            with open(self.recording_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(exchange, ensure_ascii=False) + "\n")
        return text


@dataclass(frozen=True)
class BackendConfig:
    """Declarative backend description, as found in backend config files."""

    kind: str  # http_chat | scripted | replay
    endpoint: str | None = None
    model_name: str | None = None
    script: list | dict | None = None
    mode: str | None = None
    recording_path: str | None = None
    record_to: str | None = None  # wrap in a recorder writing here

    @classmethod
    def from_json(cls, doc: dict) -> "BackendConfig":
        kind = doc.get("kind")
        if kind not in ("http_chat", "scripted", "replay"):
            raise ConfigurationError(f"unknown backend kind: {kind!r}")
        return cls(
            kind=kind,
            endpoint=doc.get("endpoint"),
            model_name=doc.get("model_name"),
            script=doc.get("script"),
            mode=doc.get("mode"),
            recording_path=doc.get("recording_path"),
            record_to=doc.get("record_to"),
        )


def build_backend(config: BackendConfig) -> Backend:
    backend: Backend
    if config.kind == "http_chat":
        if not config.endpoint or not config.model_name:
            raise ConfigurationError("http_chat backend needs endpoint and model_name")
        backend = HttpChatBackend(config.endpoint, config.model_name)
    elif config.kind == "scripted":
        if config.script is None:
            raise ConfigurationError("scripted backend needs a script")
        backend = ScriptedBackend(config.script, mode=config.mode)
    elif config.kind == "replay":
        if not config.recording_path:
            raise ConfigurationError("replay backend needs recording_path")
        backend = ReplayBackend(config.recording_path)
    else:
        raise ConfigurationError(f"unknown backend kind: {config.kind!r}")
    if config.record_to:
        backend = RecordingBackend(backend, config.record_to)
    return backend


def load_backends(path: str | Path) -> dict[str, Backend]:
    """Load a backend-id -> backend map from a JSON config file."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not doc:
        raise ConfigurationError("backend config must be a non-empty id -> config map")
    return {name: build_backend(BackendConfig.from_json(cfg)) for name, cfg in doc.items()}


def complete(
    messages: list[ChatMessage],
    params: SamplingParams,
    backend: Backend | BackendConfig,
) -> str:
    """One request/response against a backend or backend config."""
    if isinstance(backend, BackendConfig):
        backend = build_backend(backend)
    return backend.complete(messages, params)


def record(
    messages: list[ChatMessage],
    params: SamplingParams,
    backend: Backend,
    recording_path: str | Path,
) -> str:
    """Complete against ``backend`` and persist the exchange for replay."""
    return RecordingBackend(backend, recording_path).complete(messages, params)
