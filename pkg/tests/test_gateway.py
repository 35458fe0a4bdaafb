from __future__ import annotations

import json
import threading

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from datastory.gateway import (
    BackendError,
    ChatRequest,
    ChatResponse,
    Gateway,
    GatewayError,
    HttpBackend,
    Message,
    RateLimiter,
    ReplayBackend,
    ReplayMiss,
    RetryPolicy,
    Transcript,
    TranscriptRecord,
    TransportError,
    scripted,
)


class FakeClock:
    def __init__(self) -> None:
        self.t = 0.0
        self.sleeps: list[float] = []

    def now(self) -> float:
        return self.t

    def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)
        self.t += max(seconds, 0.0)


def req(content="hello", tag="reflection.generate", **kw) -> ChatRequest:
    return ChatRequest(model=kw.pop("model", "m"), messages=(Message("system", "s"), Message("user", content)),
                       tag=tag, **kw)


def ok_body(text="fine"):
    return {"choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 3, "completion_tokens": 1}}


def http_gateway(handler, policy=RetryPolicy(3, 100, 2.0), clock=None):
    clock = clock or FakeClock()
    backend = HttpBackend("https://llm.example/v1", "secret", transport=httpx.MockTransport(handler))
    return Gateway(backend, clock=clock, seed=7).with_retry(policy), clock


# --------------------------------------------------------------------------
# Requests and digests


def test_request_invariants():
    with pytest.raises(ValueError):
        ChatRequest("m", ())
    with pytest.raises(ValueError):
        ChatRequest("m", (Message("assistant", "x"),))
    with pytest.raises(ValueError):
        ChatRequest("m", (Message("user", "x"),), temperature=2.5)
    with pytest.raises(ValueError):
        ChatRequest("m", (Message("user", "x"),), max_tokens=0)


def test_digest_excludes_tag_but_not_content():
    assert req(tag="a").digest == req(tag="b").digest
    assert req("x").digest != req("y").digest
    assert req(temperature=0.0).digest != req(temperature=0.7).digest


def test_response_stop_requires_content():
    with pytest.raises(ValueError):
        ChatResponse("", "stop")
    assert ChatResponse("", "length").content == ""


# --------------------------------------------------------------------------
# HTTP backend and retries


def test_http_request_shape():
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["url"] = str(request.url)
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json=ok_body("done"))

    gw, _ = http_gateway(handler)
    r = gw.complete(req(temperature=0.0, max_tokens=50))
    assert r.content == "done" and r.retries == 0 and r.prompt_tokens == 3
    assert seen["url"] == "https://llm.example/v1/chat/completions"
    assert seen["auth"] == "Bearer secret"
    assert seen["body"]["model"] == "m" and seen["body"]["max_tokens"] == 50
    assert seen["body"]["messages"][1] == {"role": "user", "content": "hello"}


def test_429_twice_then_success_reports_two_retries():
    statuses = iter([429, 429, 200])

    def handler(request):
        s = next(statuses)
        return httpx.Response(s, json=ok_body() if s == 200 else {"error": "slow down"})

    gw, clock = http_gateway(handler)
    r = gw.complete(req())
    assert r.retries == 2
    assert len(clock.sleeps) == 2


def test_backoff_delays_within_jitter_band():
    def handler(request):
        return httpx.Response(503, text="unavailable")

    for seed in range(20):
        clock = FakeClock()
        backend = HttpBackend("https://x/v1", "k", transport=httpx.MockTransport(handler))
        gw = Gateway(backend, clock=clock, seed=seed).with_retry(RetryPolicy(3, 100, 2.0))
        with pytest.raises(BackendError):
            gw.complete(req())
        d2, d3 = (s * 1000 for s in clock.sleeps)
        assert 80 <= d2 <= 120
        assert 160 <= d3 <= 240


def test_always_failing_makes_exactly_max_attempts():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(500, text="boom")

    gw, _ = http_gateway(handler)
    with pytest.raises(BackendError) as e:
        gw.complete(req())
    assert len(calls) == 3
    assert e.value.status == 500 and "boom" in e.value.body


def test_400_is_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400, text="bad request " + "x" * 2000)

    gw, clock = http_gateway(handler)
    with pytest.raises(BackendError) as e:
        gw.complete(req())
    assert len(calls) == 1 and clock.sleeps == []
    assert e.value.status == 400 and len(e.value.body) <= 500


def test_transport_errors_are_retried():
    attempts = []

    def handler(request):
        attempts.append(1)
        if len(attempts) < 3:
            raise httpx.ConnectError("refused", request=request)
        return httpx.Response(200, json=ok_body())

    gw, _ = http_gateway(handler)
    assert gw.complete(req()).retries == 2


def test_timeout_exhausts_to_transport_error():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    gw, _ = http_gateway(handler, RetryPolicy(2, 10, 2.0))
    with pytest.raises(TransportError):
        gw.complete(req())


def test_retry_policy_validation():
    with pytest.raises(ValueError):
        RetryPolicy(max_attempts=0)


def test_from_env_requires_key(monkeypatch):
    monkeypatch.delenv("DN_API_KEY", raising=False)
    with pytest.raises(GatewayError):
        HttpBackend.from_env()
    monkeypatch.setenv("DN_API_KEY", "k")
    monkeypatch.setenv("DN_API_BASE", "https://base.example/v2/")
    assert HttpBackend.from_env().url == "https://base.example/v2/chat/completions"


# --------------------------------------------------------------------------
# Transcript and replay


def test_record_then_replay():
    live = Gateway(scripted(lambda r: f"echo {r.prompt}"))
    live.complete(req("one"))
    live.complete(req("two", tag="outline.generate"))
    text = live.transcript.to_jsonl()
    first = json.loads(text.splitlines()[0])
    assert list(first) == ["request_digest", "tag", "response"]

    replay = Gateway(ReplayBackend(Transcript.from_jsonl(text)))
    assert replay.complete(req("two", tag="outline.generate")).content == "echo two"
    assert replay.complete(req("one")).content == "echo one"


def test_strict_replay_miss():
    t = Transcript([TranscriptRecord(req("one").digest, "reflection.generate", ChatResponse("stored"))])
    gw = Gateway(ReplayBackend(t))
    with pytest.raises(ReplayMiss, match="no recorded response"):
        gw.complete(req("edited prompt"))


def test_lenient_replay_falls_back_to_tag_index():
    t = Transcript([
        TranscriptRecord(req("a").digest, "reflection.generate", ChatResponse("first")),
        TranscriptRecord(req("b").digest, "reflection.generate", ChatResponse("second")),
    ])
    gw = Gateway(ReplayBackend(t, lenient=True))
    assert gw.complete(req("changed 1")).content == "first"
    assert gw.complete(req("changed 2")).content == "second"
    with pytest.raises(ReplayMiss):
        gw.complete(req("changed 3"))


def test_transcript_bad_line():
    with pytest.raises(ValueError):
        Transcript.from_jsonl('{"request_digest": "x"}\nnot json\n')


def test_transcript_concurrent_appends():
    gw = Gateway(scripted(lambda r: r.prompt))
    threads = [threading.Thread(target=lambda i=i: [gw.complete(req(f"{i}-{j}")) for j in range(25)]) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(gw.transcript) == 200


@given(st.text(min_size=1, max_size=40), st.text(max_size=20))
@settings(max_examples=50, deadline=None)
def test_transcript_round_trip_property(content, tag):
    t = Transcript([TranscriptRecord(req(content).digest, tag, ChatResponse(content, prompt_tokens=1))])
    assert Transcript.from_jsonl(t.to_jsonl()).records == t.records


# --------------------------------------------------------------------------
# Rate limiting


def test_rate_limiter_window():
    clock = FakeClock()
    limiter = RateLimiter(3, 1.0, clock)
    issued = []
    for _ in range(10):
        issued.append(limiter.acquire())
        clock.t += 0.1
    for t0 in issued:
        in_window = [t for t in issued if t0 <= t < t0 + 1.0]
        assert len(in_window) <= 3
    assert issued[:3] == pytest.approx([0.0, 0.1, 0.2])
    assert issued[3] == pytest.approx(1.0)


def test_rate_limiter_shared_by_gateway():
    clock = FakeClock()
    gw = Gateway(scripted(lambda r: "x"), limiter=RateLimiter(2, 1.0, clock), clock=clock)
    for i in range(5):
        gw.complete(req(str(i)))
    assert clock.t >= 2.0
