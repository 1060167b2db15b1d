import pytest

from diarloop.errors import GatewayError, ValidationError
from diarloop.gateway import (
    GATEWAY_TOKEN_ENV,
    EchoGateway,
    HttpGateway,
    RuleBasedGateway,
    ScriptedGateway,
    make_gateway,
    request_key,
)


class _Response:
    def __init__(self, body, status=200):
        self._body = body
        self.status_code = status

    def raise_for_status(self):
        if self.status_code >= 400:
            raise RuntimeError(f"HTTP {self.status_code}")

    def json(self):
        return self._body


class TestHttpGateway:
    def test_posts_request_and_reads_text(self, monkeypatch):
        captured = {}

        def fake_post(url, json=None, headers=None, timeout=None):
            captured.update(url=url, json=json, headers=headers)
            return _Response({"text": "a summary"})

        monkeypatch.setattr("httpx.post", fake_post)
        monkeypatch.setenv(GATEWAY_TOKEN_ENV, "sekrit")
        gw = HttpGateway("http://llm.local/complete")
        assert gw.complete("summarization", "filled body") == "a summary"
        assert captured["url"] == "http://llm.local/complete"
        assert captured["json"] == {
            "prompt_name": "summarization",
            "filled_template": "filled body",
        }
        assert captured["headers"]["Authorization"] == "Bearer sekrit"

    def test_no_token_no_header(self, monkeypatch):
        monkeypatch.delenv(GATEWAY_TOKEN_ENV, raising=False)
        monkeypatch.setattr(
            "httpx.post", lambda *a, **k: _Response({"text": "ok"})
        )
        gw = HttpGateway("http://llm.local")
        assert gw.complete("correction", "x") == "ok"

    def test_http_error_wrapped(self, monkeypatch):
        monkeypatch.setattr("httpx.post", lambda *a, **k: _Response({}, status=500))
        with pytest.raises(GatewayError):
            HttpGateway("http://llm.local").complete("correction", "x")

    def test_missing_text_field(self, monkeypatch):
        monkeypatch.setattr("httpx.post", lambda *a, **k: _Response({"answer": "?"}))
        with pytest.raises(GatewayError):
            HttpGateway("http://llm.local").complete("correction", "x")


class TestScriptedGateway:
    def test_keyed_by_request_hash(self):
        gw = ScriptedGateway()
        key = gw.script("correction", "filled", "response")
        assert key == request_key("correction", "filled")
        assert gw.complete("correction", "filled") == "response"

    def test_unknown_request_raises(self):
        with pytest.raises(GatewayError):
            ScriptedGateway().complete("correction", "never scripted")

    def test_distinct_prompts_distinct_keys(self):
        assert request_key("correction", "x") != request_key("summarization", "x")


class TestMakeGateway:
    def test_kinds(self):
        assert isinstance(make_gateway("echo"), EchoGateway)
        assert isinstance(make_gateway("rule"), RuleBasedGateway)
        assert isinstance(make_gateway("scripted", scripted={"k": "v"}), ScriptedGateway)
        assert isinstance(make_gateway("http", endpoint="http://x"), HttpGateway)

    def test_http_requires_endpoint(self):
        with pytest.raises(ValidationError):
            make_gateway("http")

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            make_gateway("quantum")
