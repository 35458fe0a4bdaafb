"""Chat-completion access with retry, rate limiting and record/replay.

Backends are plain callables ``ChatRequest -> ChatResponse``. :class:`Gateway`
wraps one with a retry policy, an optional rate limiter, and a session
transcript that every successful call is appended to.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Literal, Optional, Protocol

import httpx

logger = logging.getLogger(__name__)

MessageRole = Literal["system", "user", "assistant"]

GENERATE_TEMPERATURE = 0.7
CRITIQUE_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 2048


class GatewayError(RuntimeError):
    """Base class for everything a backend call can fail with."""

    transient = False


class TransportError(GatewayError):
    """Network failure or timeout."""

    transient = True


class BackendError(GatewayError):
    def __init__(self, status: int, body: str) -> None:
        self.status = status
        self.body = body[:500]
        super().__init__(f"backend returned HTTP {status}: {self.body}")

    @property
    def transient(self) -> bool:  # type: ignore[override]
        return self.status == 429 or self.status >= 500


class ReplayMiss(GatewayError):
    def __init__(self, tag: str, digest: str) -> None:
        self.tag = tag
        self.digest = digest
        super().__init__(f"no recorded response for tag {tag!r} (digest {digest[:12]})")


@dataclass(frozen=True)
class Message:
    role: MessageRole
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[Message, ...]
    temperature: float = GENERATE_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    tag: str = ""

    def __post_init__(self) -> None:
        msgs = tuple(m if isinstance(m, Message) else Message(**m) for m in self.messages)
        object.__setattr__(self, "messages", msgs)
        if not msgs:
            raise ValueError("a chat request needs at least one message")
        if msgs[0].role not in ("system", "user"):
            raise ValueError("first message must come from system or user")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def payload(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    @property
    def digest(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @property
    def prompt(self) -> str:
        """The last user message, which is what traces record."""
        users = [m.content for m in self.messages if m.role == "user"]
        return users[-1] if users else self.messages[-1].content


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: Literal["stop", "length", "error"] = "stop"
    prompt_tokens: int = 0
    completion_tokens: int = 0
    retries: int = 0

    def __post_init__(self) -> None:
        if self.finish_reason == "stop" and not self.content:
            raise ValueError("a stopped response must have content")

    def to_dict(self) -> dict:
        return {
            "content": self.content,
            "finish_reason": self.finish_reason,
            "usage": {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChatResponse":
        usage = d.get("usage") or {}
        return cls(
            content=d["content"],
            finish_reason=d.get("finish_reason", "stop"),
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )


Backend = Callable[[ChatRequest], ChatResponse]


# --------------------------------------------------------------------------
# Transcript


@dataclass(frozen=True)
class TranscriptRecord:
    request_digest: str
    tag: str
    response: ChatResponse

    def to_json(self) -> str:
        # Field order is part of the file format.
        return json.dumps(
            {"request_digest": self.request_digest, "tag": self.tag, "response": self.response.to_dict()},
            ensure_ascii=False,
        )


class Transcript:
    """Append-only, thread-safe list of recorded calls."""

    def __init__(self, records: Iterable[TranscriptRecord] = ()) -> None:
        self._records = list(records)
        self._lock = threading.Lock()

    def append(self, record: TranscriptRecord) -> None:
        with self._lock:
            self._records.append(record)

    @property
    def records(self) -> tuple[TranscriptRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        records = []
        for lineno, line in enumerate(text.split("\n"), 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                records.append(TranscriptRecord(d["request_digest"], d["tag"], ChatResponse.from_dict(d["response"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ValueError(f"transcript line {lineno}: {e}") from None
        return cls(records)

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        return cls.from_jsonl(Path(path).read_text("utf-8"))


class ReplayBackend:
    """Serve responses from a transcript.

    Strict mode matches on request digest only. Lenient mode falls back to the
    n-th record carrying the same tag, where n counts prior calls with that tag.
    """

    def __init__(self, transcript: Transcript, lenient: bool = False) -> None:
        self.lenient = lenient
        self._by_digest: dict[str, deque[ChatResponse]] = defaultdict(deque)
        self._by_tag: dict[str, list[ChatResponse]] = defaultdict(list)
        for r in transcript.records:
            self._by_digest[r.request_digest].append(r.response)
            self._by_tag[r.tag].append(r.response)
        self._tag_seen: dict[str, int] = defaultdict(int)
        self._lock = threading.Lock()

    def __call__(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            idx = self._tag_seen[request.tag]
            self._tag_seen[request.tag] += 1
            queue = self._by_digest.get(request.digest)
            if queue:
                # Identical prompts recorded twice replay in recorded order; the
                # last one keeps answering once the queue would run dry.
                return queue.popleft() if len(queue) > 1 else queue[0]
            if self.lenient:
                recorded = self._by_tag.get(request.tag, [])
                if idx < len(recorded):
                    return recorded[idx]
        raise ReplayMiss(request.tag, request.digest)


class HttpBackend:
    """POST ``{base_url}/chat/completions`` with bearer auth."""

    def __init__(
        self,
        base_url: str,
        api_key: str,
        timeout: float = 120.0,
        transport: Optional[httpx.BaseTransport] = None,
    ) -> None:
        self.url = base_url.rstrip("/") + "/chat/completions"
        self._client = httpx.Client(
            timeout=timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {api_key}"},
        )

    @classmethod
    def from_env(cls, **kwargs) -> "HttpBackend":
        key = os.environ.get("DN_API_KEY")
        if not key:
            raise GatewayError("DN_API_KEY is not set")
        return cls(os.environ.get("DN_API_BASE", "https://api.openai.com/v1"), key, **kwargs)

    def __call__(self, request: ChatRequest) -> ChatResponse:
        try:
            resp = self._client.post(self.url, json=request.payload())
        except httpx.TimeoutException as e:
            raise TransportError(f"timeout: {e}") from e
        except httpx.TransportError as e:
            raise TransportError(str(e)) from e
        if resp.status_code >= 400:
            raise BackendError(resp.status_code, resp.text)
        try:
            body = resp.json()
            choice = body["choices"][0]
            content = choice["message"].get("content") or ""
            finish = choice.get("finish_reason") or "stop"
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise BackendError(resp.status_code, f"unexpected response body: {resp.text}") from e
        if finish not in ("stop", "length"):
            finish = "error"
        if finish == "stop" and not content:
            finish = "error"
        usage = body.get("usage") or {}
        return ChatResponse(
            content=content,
            finish_reason=finish,
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )

    def close(self) -> None:
        self._client.close()


# --------------------------------------------------------------------------
# Retry and rate limiting


class Clock(Protocol):
    def now(self) -> float: ...

    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay_ms: int = 1000
    multiplier: float = 2.0
    jitter: float = 0.2

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def delay_ms(self, retry: int, rng: random.Random) -> float:
        """Delay before retry number ``retry`` (1 = the second attempt)."""
        nominal = self.base_delay_ms * self.multiplier ** (retry - 1)
        return nominal * (1.0 + rng.uniform(-self.jitter, self.jitter))


class RateLimiter:
    """At most ``rate`` calls are issued in any window of ``period`` seconds."""

    def __init__(self, rate: int, period: float = 1.0, clock: Optional[Clock] = None) -> None:
        if rate < 1:
            raise ValueError("rate must be >= 1")
        self.rate = rate
        self.period = period
        self.clock = clock or SystemClock()
        self._issued: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        with self._lock:
            while True:
                now = self.clock.now()
                while self._issued and now - self._issued[0] >= self.period:
                    self._issued.popleft()
                if len(self._issued) < self.rate:
                    self._issued.append(now)
                    return now
                self.clock.sleep(self.period - (now - self._issued[0]))


@dataclass
class Gateway:
    backend: Backend
    model: str = "gpt-4o"
    retry: RetryPolicy = field(default_factory=lambda: RetryPolicy(max_attempts=1))
    limiter: Optional[RateLimiter] = None
    clock: Clock = field(default_factory=SystemClock)
    seed: int = 0
    transcript: Transcript = field(default_factory=Transcript)

    def __post_init__(self) -> None:
        self._rng = random.Random(self.seed)
        self._rng_lock = threading.Lock()

    def with_retry(self, policy: RetryPolicy) -> "Gateway":
        return replace(self, retry=policy)

    def complete(self, request: ChatRequest) -> ChatResponse:
        retries = 0
        while True:
            if self.limiter is not None:
                self.limiter.acquire()
            try:
                response = self.backend(request)
                break
            except GatewayError as e:
                if not e.transient or retries + 1 >= self.retry.max_attempts:
                    raise
                retries += 1
                with self._rng_lock:
                    delay = self.retry.delay_ms(retries, self._rng)
                logger.warning("%s failed (%s); retry %d in %.0f ms", request.tag or "call", e, retries, delay)
                self.clock.sleep(delay / 1000.0)
        response = replace(response, retries=retries)
        self.transcript.append(TranscriptRecord(request.digest, request.tag, response))
        return response


def scripted(responder: Callable[[ChatRequest], str]) -> Backend:
    """Wrap a ``request -> text`` function as a backend (tests and dry runs)."""

    def backend(request: ChatRequest) -> ChatResponse:
        return ChatResponse(content=responder(request))

    return backend
