import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import httpx
import pytest

from ragdebate.backends import (
    AuthError,
    BackendUnavailable,
    CacheMiss,
    ChatRequest,
    ChatResponse,
    ClientRequestError,
    OpenAIChatBackend,
    ProtocolError,
    Purpose,
    RecordingBackend,
    ReplayBackend,
    ReplayCache,
    RequestTag,
    ScriptedBackend,
    ScriptError,
    TokenBucket,
    record_key,
)


def req(user="hello", system="sys", temperature=0.5, purpose=Purpose.TALK, agent="Agent_0", rnd=1, role="debater"):
    return ChatRequest(system, user, temperature, RequestTag(role, agent, rnd, purpose))


# ------------------------------------------------------------------ record_key

def test_record_key_stable():
    assert record_key(req()) == record_key(req())


def test_record_key_ignores_tag():
    assert record_key(req(agent="Agent_0")) == record_key(req(agent="Agent_1", rnd=3))


@pytest.mark.parametrize(
    "other",
    [req(user="hellp"), req(system="sys "), req(temperature=0.7)],
)
def test_record_key_sensitive(other):
    assert record_key(req()) != record_key(other)


def test_temperature_bounds():
    with pytest.raises(ValueError):
        req(temperature=2.5)


# ------------------------------------------------------------------ scripted

def test_scripted_table_lookup_order():
    b = ScriptedBackend.from_table(
        {
            (Purpose.TALK, "Agent_0", 1): "exact",
            (Purpose.TALK, "Agent_0", None): "any round",
            (Purpose.TALK, None, 2): "any agent r2",
            (Purpose.TALK, None, None): "fallback",
        }
    )
    assert b.complete(req(agent="Agent_0", rnd=1)).text == "exact"
    assert b.complete(req(agent="Agent_0", rnd=5)).text == "any round"
    assert b.complete(req(agent="Agent_1", rnd=2)).text == "any agent r2"
    assert b.complete(req(agent="Agent_1", rnd=3)).text == "fallback"
    assert b.call_count == 4


def test_scripted_missing_entry():
    b = ScriptedBackend.from_table({(Purpose.JUDGE, None, None): "[Yes]"})
    with pytest.raises(ScriptError):
        b.complete(req(purpose=Purpose.TALK))


# ------------------------------------------------------------------ replay

def test_replay_hit_and_strict_miss(tmp_path):
    cache = ReplayCache(tmp_path / "c.jsonl")
    cache.append(req(), ChatResponse("cached"))
    replay = ReplayBackend(ReplayCache(tmp_path / "c.jsonl"))
    assert replay.complete(req()).text == "cached"
    with pytest.raises(CacheMiss):
        replay.complete(req(user="other"))


def test_replay_repeated_requests_walk_in_order(tmp_path):
    path = tmp_path / "c.jsonl"
    rec = RecordingBackend(ScriptedBackend(lambda r: f"reply from {r.tag.agent_id}"), ReplayCache(path))
    rec.complete(req(agent="Agent_0"))
    rec.complete(req(agent="Agent_1"))
    replay = ReplayBackend(ReplayCache(path))
    assert replay.complete(req()).text == "reply from Agent_0"
    assert replay.complete(req()).text == "reply from Agent_1"
    with pytest.raises(CacheMiss):
        replay.complete(req())


def test_replay_cache_file_schema(tmp_path):
    path = tmp_path / "c.jsonl"
    ReplayCache(path).append(req(), ChatResponse("x"))
    row = json.loads(path.read_text())
    assert set(row) == {"digest", "request", "response"}
    assert row["digest"] == record_key(req())
    assert ChatRequest.from_dict(row["request"]) == req()


def test_non_strict_replay_falls_back_and_records(tmp_path):
    cache = ReplayCache(tmp_path / "c.jsonl")
    fallback = ScriptedBackend(lambda r: "fresh")
    replay = ReplayBackend(cache, strict=False, fallback=fallback)
    assert replay.complete(req()).text == "fresh"
    assert len(ReplayCache(tmp_path / "c.jsonl")) == 1


# ------------------------------------------------------------------ live client, mocked transport

def _completion(text="ok"):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}], "usage": {"prompt_tokens": 3, "completion_tokens": 1}})


def _client(handler, **kw):
    sleeps = []
    backend = OpenAIChatBackend(
        base_url="http://test/v1", api_key="k", model="m", transport=httpx.MockTransport(handler),
        sleep=sleeps.append, **kw,
    )
    return backend, sleeps


def test_live_payload_shape():
    seen = {}

    def handler(request):
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers["authorization"]
        seen["url"] = str(request.url)
        return _completion("hi")

    backend, _ = _client(handler, role_models={"evaluator": "big-model"})
    out = backend.complete(req(user="U", system="S", temperature=0.5))
    assert out.text == "hi" and out.usage.prompt_tokens == 3
    assert seen["url"] == "http://test/v1/chat/completions"
    assert seen["auth"] == "Bearer k"
    assert seen["body"] == {
        "model": "m",
        "messages": [{"role": "system", "content": "S"}, {"role": "user", "content": "U"}],
        "temperature": 0.5,
    }
    backend.complete(req(role="evaluator", purpose=Purpose.EVAL))
    assert seen["body"]["model"] == "big-model"


@pytest.mark.parametrize("status", [429, 500, 502, 503])
def test_live_retries_transient(status):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(status) if len(calls) < 3 else _completion("finally")

    backend, sleeps = _client(handler, max_retries=5, backoff=1.0, max_backoff=30.0)
    assert backend.complete(req()).text == "finally"
    assert len(calls) == 3
    assert sleeps == [1.0, 2.0]


def test_live_retries_timeouts_then_gives_up():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ReadTimeout("slow", request=request)

    backend, sleeps = _client(handler, max_retries=3, backoff=0.5, max_backoff=1.0)
    with pytest.raises(BackendUnavailable):
        backend.complete(req())
    assert len(calls) == 4
    assert sleeps == [0.5, 1.0, 1.0]


@pytest.mark.parametrize("status,exc", [(401, AuthError), (403, AuthError), (400, ClientRequestError), (404, ClientRequestError)])
def test_live_never_retries_client_errors(status, exc):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(status, text="nope")

    backend, sleeps = _client(handler)
    with pytest.raises(exc):
        backend.complete(req())
    assert len(calls) == 1 and sleeps == []


def test_live_retry_after_header_respected():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(429, headers={"retry-after": "7"}) if len(calls) == 1 else _completion()

    backend, sleeps = _client(handler)
    backend.complete(req())
    assert sleeps == [7.0]


@pytest.mark.parametrize("payload", [{"choices": []}, {"nope": 1}, "not json"])
def test_live_malformed_provider_json(payload):
    def handler(request):
        if isinstance(payload, str):
            return httpx.Response(200, text=payload)
        return httpx.Response(200, json=payload)

    backend, _ = _client(handler)
    with pytest.raises(ProtocolError):
        backend.complete(req())


def test_token_bucket_waits_when_empty():
    t = [0.0]
    slept = []

    def sleep(d):
        slept.append(d)
        t[0] += d

    bucket = TokenBucket(rate=2.0, capacity=1.0, clock=lambda: t[0], sleep=sleep)
    bucket.acquire()
    bucket.acquire()
    assert slept == [pytest.approx(0.5)]


# ------------------------------------------------------------------ live client, real socket

class _Echo(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["content-length"])))
        user = body["messages"][1]["content"]
        out = json.dumps({"choices": [{"message": {"content": user}}]}).encode()
        self.send_response(200)
        self.send_header("content-type", "application/json")
        self.send_header("content-length", str(len(out)))
        self.end_headers()
        self.wfile.write(out)

    def log_message(self, *args):
        pass


@pytest.fixture
def echo_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Echo)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1"
    server.shutdown()


@pytest.mark.parametrize(
    "text",
    ["plain", "unicode – “quotes” ☃", "trailing spaces   \n\n", 'json-ish {"a": [1]} \\ backslash', "\ttabs\r\nCRLF"],
)
def test_live_passthrough_is_byte_exact(echo_server, text):
    backend = OpenAIChatBackend(base_url=echo_server, api_key="k", model="m")
    try:
        assert backend.complete(req(user=text)).text == text
    finally:
        backend.close()


def test_live_client_concurrent_use(echo_server):
    backend = OpenAIChatBackend(base_url=echo_server, api_key="k", model="m", max_concurrency=2)
    out = {}

    def call(i):
        out[i] = backend.complete(req(user=f"msg {i}")).text

    threads = [threading.Thread(target=call, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    backend.close()
    assert out == {i: f"msg {i}" for i in range(8)}
