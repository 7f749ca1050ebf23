import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from srloop.llm import (
    ApiError,
    ChatRequest,
    ChatResponse,
    HttpBackend,
    ScriptedBackend,
    TokenUsage,
    TranscriptExhaustedError,
    TransportError,
    UnknownModelError,
    estimate_cost,
    write_transcript,
)

REQ = ChatRequest(system="be terse", user="propose equations")


class TestChatRequest:
    def test_defaults(self):
        assert REQ.temperature == 0.7

    @pytest.mark.parametrize("kwargs", [
        {"system": "", "user": "u"},
        {"system": "s", "user": ""},
        {"system": "s", "user": "u", "temperature": 2.5},
        {"system": "s", "user": "u", "temperature": -0.1},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            ChatRequest(**kwargs)


class TestScripted:
    def test_entries_in_order_then_exhausted(self):
        backend = ScriptedBackend(["first", "second"])
        assert backend.complete(REQ).text == "first"
        assert backend.complete(REQ).text == "second"
        with pytest.raises(TranscriptExhaustedError):
            backend.complete(REQ)

    def test_stateless_twins(self):
        a = ScriptedBackend(["x", "y"])
        b = ScriptedBackend(["x", "y"])
        assert [a.complete(REQ), a.complete(REQ)] == [b.complete(REQ), b.complete(REQ)]

    def test_token_estimate(self):
        backend = ScriptedBackend(["three word reply"])
        resp = backend.complete(REQ)
        assert resp.completion_tokens == 3
        assert resp.prompt_tokens == len(REQ.system.split()) + len(REQ.user.split())

    def test_transcript_file_round_trip(self, tmp_path):
        entries = ["line one\nline two", "second turn", "third %% not a delimiter"]
        path = tmp_path / "t.txt"
        write_transcript(entries, path)
        backend = ScriptedBackend.from_file(path)
        assert backend.entries == entries


class _Handler(BaseHTTPRequestHandler):
    canned_status = 200
    received: list[dict] = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).received.append({"body": body, "auth": self.headers.get("Authorization")})
        if self.canned_status != 200:
            self.send_response(self.canned_status)
            self.end_headers()
            self.wfile.write(b"boom")
            return
        reply = {
            "choices": [{"message": {"role": "assistant", "content": "canned text"}}],
            "usage": {"prompt_tokens": 11, "completion_tokens": 7},
        }
        data = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    _Handler.received = []
    _Handler.canned_status = 200
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()


class TestHttp:
    def test_round_trip(self, stub_server, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-test")
        backend = HttpBackend(endpoint=stub_server, model="m1", key_env_var="TEST_LLM_KEY")
        resp = backend.complete(REQ)
        assert resp == ChatResponse("canned text", 11, 7, "http:m1")

    def test_single_system_and_user_message(self, stub_server, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-test")
        backend = HttpBackend(endpoint=stub_server, model="m1", key_env_var="TEST_LLM_KEY")
        backend.complete(ChatRequest(system="s", user="u", model="m1"))
        body = _Handler.received[-1]["body"]
        assert [m["role"] for m in body["messages"]] == ["system", "user"]
        assert body["temperature"] == 0.7
        assert _Handler.received[-1]["auth"] == "Bearer sk-test"

    def test_api_error_surfaces_body(self, stub_server, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-test")
        _Handler.canned_status = 500
        backend = HttpBackend(endpoint=stub_server, key_env_var="TEST_LLM_KEY")
        with pytest.raises(ApiError) as err:
            backend.complete(REQ)
        assert err.value.status == 500
        assert "boom" in err.value.body

    def test_transport_error_after_retries(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-test")
        backend = HttpBackend(
            endpoint="http://127.0.0.1:9",  # nothing listens on the discard port
            key_env_var="TEST_LLM_KEY",
            timeout=0.2,
            max_retries=1,
            backoff=0.01,
        )
        with pytest.raises(TransportError):
            backend.complete(REQ)

    def test_missing_key(self, monkeypatch):
        monkeypatch.delenv("NO_SUCH_KEY", raising=False)
        backend = HttpBackend(key_env_var="NO_SUCH_KEY")
        with pytest.raises(TransportError) as err:
            backend.complete(REQ)
        assert "NO_SUCH_KEY" in str(err.value)

    def test_repr_has_no_key_material(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-secret")
        backend = HttpBackend(key_env_var="TEST_LLM_KEY")
        assert "sk-secret" not in repr(backend)


class TestCost:
    def test_zero_tokens(self):
        assert estimate_cost(TokenUsage(), "m", {"m": (0.1, 0.2)}) == 0.0

    def test_linearity(self):
        usage = TokenUsage(prompt_tokens=1000, completion_tokens=1000)
        a, b = 3e-6, 9e-6
        assert estimate_cost(usage, "m", {"m": (a, b)}) == pytest.approx(1000 * a + 1000 * b)

    def test_unknown_model(self):
        with pytest.raises(UnknownModelError):
            estimate_cost(TokenUsage(1, 1), "mystery", {})

    def test_usage_accumulates(self):
        usage = TokenUsage()
        usage.add(ChatResponse("t", 5, 3, "b"))
        usage.add(ChatResponse("t", 2, 1, "b"))
        assert (usage.prompt_tokens, usage.completion_tokens) == (7, 4)
