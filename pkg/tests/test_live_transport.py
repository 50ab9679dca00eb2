from __future__ import annotations

import base64
import json

import httpx
import pytest

from sbac.gateway import (
    CallKind,
    ChatRequest,
    GatewayTimeout,
    ImagePart,
    ImagePurpose,
    LiveConfig,
    LiveTransport,
    TextPart,
    TransportError,
)

import fixtures as fx

CONFIG = LiveConfig(
    endpoint="https://llm.example/v1",
    api_key="secret-key",
    model_frontier="frontier-model",
    model_fast="fast-model",
)


def transport_with(handler) -> LiveTransport:
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return LiveTransport(CONFIG, client=client)


def completion(text: str) -> httpx.Response:
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


def frontier_request() -> ChatRequest:
    return ChatRequest(
        kind=CallKind.CI_ANALYSIS,
        system_prompt="system text",
        user_parts=(TextPart("user text"), ImagePart(fx.PNG, ImagePurpose.SOM)),
        schema_id="analyze",
    )


class TestLiveTransport:
    def test_request_shape_and_model_routing(self):
        captured = {}

        def handler(request: httpx.Request) -> httpx.Response:
            captured["url"] = str(request.url)
            captured["auth"] = request.headers["Authorization"]
            captured["body"] = json.loads(request.content)
            return completion("hello")

        result = transport_with(handler).send(frontier_request())
        assert result.text == "hello"
        assert captured["url"] == "https://llm.example/v1/chat/completions"
        assert captured["auth"] == "Bearer secret-key"
        body = captured["body"]
        assert body["model"] == "frontier-model"
        assert "temperature" not in body  # provider default unless configured
        assert body["messages"][0] == {"role": "system", "content": "system text"}
        content = body["messages"][1]["content"]
        assert content[0] == {"type": "text", "text": "user text"}
        expected_url = "data:image/png;base64," + base64.b64encode(fx.PNG).decode()
        assert content[1]["image_url"]["url"] == expected_url

    def test_fast_tier_uses_fast_model(self):
        captured = {}

        def handler(request: httpx.Request) -> httpx.Response:
            captured["body"] = json.loads(request.content)
            return completion("{}")

        request = ChatRequest(
            kind=CallKind.INTENT_CLASSIFICATION,
            system_prompt="s",
            user_parts=(TextPart("m"),),
            schema_id="classify",
        )
        transport_with(handler).send(request)
        assert captured["body"]["model"] == "fast-model"

    def test_temperature_sent_when_configured(self):
        captured = {}

        def handler(request: httpx.Request) -> httpx.Response:
            captured["body"] = json.loads(request.content)
            return completion("x")

        config = LiveConfig(
            endpoint="https://llm.example/v1",
            api_key="k",
            model_frontier="f",
            model_fast="m",
            temperature=0.2,
        )
        client = httpx.Client(transport=httpx.MockTransport(handler))
        LiveTransport(config, client=client).send(frontier_request())
        assert captured["body"]["temperature"] == 0.2

    def test_http_error_is_transport_error(self):
        def handler(_request: httpx.Request) -> httpx.Response:
            return httpx.Response(500, json={"error": "boom"})

        with pytest.raises(TransportError):
            transport_with(handler).send(frontier_request())

    def test_timeout_is_gateway_timeout(self):
        def handler(_request: httpx.Request) -> httpx.Response:
            raise httpx.ReadTimeout("too slow")

        with pytest.raises(GatewayTimeout):
            transport_with(handler).send(frontier_request())

    def test_malformed_completion_payload(self):
        def handler(_request: httpx.Request) -> httpx.Response:
            return httpx.Response(200, json={"choices": []})

        with pytest.raises(TransportError):
            transport_with(handler).send(frontier_request())


class TestLiveConfig:
    def test_from_env_complete(self):
        env = {
            "LLM_ENDPOINT": "https://llm.example/v1",
            "LLM_API_KEY": "k",
            "LLM_MODEL_FRONTIER": "f",
            "LLM_MODEL_FAST": "m",
        }
        config = LiveConfig.from_env(env)
        assert config.model_fast == "m"
        assert config.temperature is None

    def test_from_env_missing_vars_listed(self):
        with pytest.raises(TransportError) as exc:
            LiveConfig.from_env({"LLM_ENDPOINT": "https://x"})
        message = str(exc.value)
        assert "LLM_API_KEY" in message
        assert "LLM_MODEL_FRONTIER" in message
        assert "LLM_MODEL_FAST" in message
