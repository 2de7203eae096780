"""Tests for module :mod:`~reflect_kit.llm_client`."""
import json
from pathlib import Path
from typing import Any, Callable, Dict, List

import httpx
import pytest
from reflect_kit._llm_client import (
    ROLES,
    CacheBackend,
    CacheLoadError,
    CacheMissError,
    CallRecord,
    HttpBackend,
    LlmClient,
    LlmSettings,
    LlmTransportError,
    RetryPolicy,
    ScriptedBackend,
    ScriptExhaustedError,
    UnsupportedParameterWarning,
    cache,
    request_digest,
    scripted,
)
from reflect_kit._prompts import Prompt

ENDPOINT = "http://llm.test/v1"


def fast_settings(**overrides: Any) -> LlmSettings:
    """Generate settings that retry three times without waiting.

    :return: Settings pointing at the mocked endpoint.
    :rtype: LlmSettings
    """
    retry = RetryPolicy(max_attempts=3, backoff=0.0, max_backoff=0.0)
    return LlmSettings(
        endpoint=ENDPOINT, model="stub", retry=retry, **overrides
    )


def completion(content: str) -> Dict[str, Any]:
    """Generate a chat-completions response body.

    :param content: Message content.
    :type content: str
    :return: Response body.
    :rtype: Dict[str, Any]
    """
    message = {"role": "assistant", "content": content}
    return {"choices": [{"message": message}]}


def http_backend(
    handler: "Callable[[httpx.Request], httpx.Response]",
) -> HttpBackend:
    """Generate a backend whose requests are answered by `handler`.

    :param handler: Mock request handler.
    :type handler: Callable[[httpx.Request], httpx.Response]
    :return: Backend using a mocked transport.
    :rtype: HttpBackend
    """
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return HttpBackend(client, api_key="secret")


def ask(backend: HttpBackend, user: str, role: str) -> str:
    """Send one request through `backend` with fast retries.

    :return: Completion text.
    :rtype: str
    """
    return backend.complete(fast_settings(), Prompt("", user), role, "")


class Observer:
    """Collects every completed call."""

    def __init__(self) -> None:
        self.calls: List[CallRecord] = []

    def llm_call(self, record: CallRecord, prompt: Prompt) -> None:
        self.calls.append(record)


class TestSettings:
    """Tests for :class:`~reflect_kit.llm_client.LlmSettings`."""

    def test_defaults(self):
        """Test greedy defaults."""
        settings = LlmSettings()
        assert settings.temperature == 0.0
        assert (settings.top_p, settings.top_k) == (0.7, 50)
        assert settings.retry.max_attempts == 6

    @pytest.mark.parametrize(
        "field,value",
        [
            pytest.param("temperature", -0.1, id="temperature"),
            pytest.param("top_p", 0.0, id="top_p"),
            pytest.param("top_k", 0, id="top_k"),
            pytest.param("repetition_penalty", 0.0, id="repetition_penalty"),
            pytest.param("max_tokens", 0, id="max_tokens"),
            pytest.param("timeout", 0.0, id="timeout"),
        ],
    )
    def test_invalid(self, field, value):
        """Test that out-of-range settings are rejected."""
        with pytest.raises(ValueError, match=f"`{field}`"):
            LlmSettings(**{field: value})

    def test_retry_policy(self):
        """Test that at least one attempt is required."""
        with pytest.raises(ValueError):
            RetryPolicy(max_attempts=0)


class TestRequestDigest:
    """Tests for :func:`~reflect_kit.llm_client.request_digest`."""

    def test_sampling_changes_digest(self):
        """Test that sampling settings are part of the digest."""
        prompt = Prompt("Act in the world.", "Action 1:")
        assert request_digest(LlmSettings(), prompt) != request_digest(
            LlmSettings(temperature=0.5), prompt
        )

    def test_transport_ignored(self):
        """Test that transport settings leave the digest alone."""
        prompt = Prompt("", "Action 1:")
        assert request_digest(LlmSettings(), prompt) == request_digest(
            LlmSettings(endpoint=ENDPOINT, timeout=5.0), prompt
        )

    def test_split_matters(self):
        """Test that moving text between system and user changes it."""
        settings = LlmSettings()
        assert request_digest(settings, Prompt("a", "b")) != request_digest(
            settings, Prompt("", "a\n\nb")
        )


class TestHttpBackend:
    """Tests for :class:`~reflect_kit.llm_client.HttpBackend`."""

    def test_request(self):
        """Test the request layout and the parsed reply."""
        seen = []

        def handler(request: httpx.Request) -> httpx.Response:
            seen.append(request)
            return httpx.Response(200, json=completion("go to fridge 1"))

        backend = http_backend(handler)
        client = LlmClient(fast_settings(), backend)
        reply = client(Prompt("You are Robby.", "Action 1:"), "action")
        assert reply == "go to fridge 1"
        (request,) = seen
        assert request.url == f"{ENDPOINT}/chat/completions"
        assert request.headers["Authorization"] == "Bearer secret"
        body = json.loads(request.content)
        assert body["model"] == "stub"
        assert [message["role"] for message in body["messages"]] == [
            "system",
            "user",
        ]
        assert body["top_k"] == 50
        assert body["temperature"] == 0.0

    def test_api_key_from_environment(self, monkeypatch):
        """Test that the bearer token is read from the environment."""
        monkeypatch.setenv("REFLECT_KIT_TEST_KEY", "from-env")
        seen = []

        def handler(request: httpx.Request) -> httpx.Response:
            seen.append(request.headers.get("Authorization"))
            return httpx.Response(200, json=completion("ok"))

        client = httpx.Client(transport=httpx.MockTransport(handler))
        backend = HttpBackend(client)
        settings = fast_settings(api_key_env="REFLECT_KIT_TEST_KEY")
        LlmClient(settings, backend)(Prompt("", "hi"), "action")
        assert seen == ["Bearer from-env"]

    @pytest.mark.parametrize(
        "status",
        [
            pytest.param(429, id="status=429"),
            pytest.param(503, id="status=503"),
        ],
    )
    def test_transient_retried(self, status):
        """Test that transient failures are retried."""
        replies = [httpx.Response(status), httpx.Response(status)]

        def handler(request: httpx.Request) -> httpx.Response:
            if replies:
                return replies.pop(0)
            return httpx.Response(200, json=completion("look"))

        backend = http_backend(handler)
        reply = ask(backend, "x", "action")
        assert reply == "look"
        assert backend.network_calls == 3

    def test_gives_up(self):
        """Test the transport error after the last attempt."""
        backend = http_backend(lambda request: httpx.Response(500))
        with pytest.raises(LlmTransportError) as exc_info:
            ask(backend, "x", "critique")
        assert exc_info.value.status == 500
        assert exc_info.value.role == "critique"
        assert backend.network_calls == 3

    def test_not_retried(self):
        """Test that client errors fail at once."""
        backend = http_backend(lambda request: httpx.Response(401))
        with pytest.raises(LlmTransportError) as exc_info:
            ask(backend, "x", "action")
        assert exc_info.value.status == 401
        assert backend.network_calls == 1

    def test_connection_error(self):
        """Test that connection failures are retried and then reported."""

        def handler(request: httpx.Request) -> httpx.Response:
            raise httpx.ConnectError("refused", request=request)

        backend = http_backend(handler)
        with pytest.raises(LlmTransportError) as exc_info:
            ask(backend, "x", "action")
        assert exc_info.value.status is None
        assert backend.network_calls == 3

    def test_unsupported_parameters(self):
        """Test that rejected extras are dropped once, with a warning."""
        bodies = []

        def handler(request: httpx.Request) -> httpx.Response:
            body = json.loads(request.content)
            bodies.append(body)
            if "top_k" in body:
                return httpx.Response(400, json={"error": "top_k"})
            return httpx.Response(200, json=completion("ok"))

        backend = http_backend(handler)
        with pytest.warns(UnsupportedParameterWarning):
            ask(backend, "x", "action")
        ask(backend, "y", "action")
        assert not backend.send_extras
        assert ["top_k" in body for body in bodies] == [True, False, False]
        assert "repetition_penalty" not in bodies[-1]

    def test_rejected_without_extras(self):
        """Test that a rejection without extras is final."""
        backend = http_backend(lambda request: httpx.Response(422))
        with pytest.warns(UnsupportedParameterWarning):
            with pytest.raises(LlmTransportError) as exc_info:
                ask(backend, "x", "action")
        assert exc_info.value.status == 422
        assert backend.network_calls == 2

    def test_malformed_body(self):
        """Test that a reply without choices is a transport error."""
        backend = http_backend(
            lambda request: httpx.Response(200, json={"choices": []})
        )
        with pytest.raises(LlmTransportError, match="Malformed"):
            ask(backend, "x", "action")

    def test_no_endpoint(self):
        """Test that a missing endpoint fails before any request."""
        backend = http_backend(lambda request: httpx.Response(200))
        with pytest.raises(LlmTransportError, match="No endpoint"):
            backend.complete(LlmSettings(), Prompt("", "x"), "action", "")
        assert backend.network_calls == 0


class TestScriptedBackend:
    """Tests for :class:`~reflect_kit.llm_client.ScriptedBackend`."""

    def test_queue_exhausted(self):
        """Test that a finished queue raises."""
        client = scripted(["one"])
        assert client(Prompt("", "x"), "action") == "one"
        with pytest.raises(ScriptExhaustedError, match="call 2"):
            client(Prompt("", "x"), "reflection")

    def test_digest_table(self):
        """Test answering by request digest."""
        prompt = Prompt("", "Action 1:")
        digest = request_digest(LlmSettings(), prompt)
        client = scripted({digest: "look"})
        assert client(prompt, "action") == "look"
        with pytest.raises(ScriptExhaustedError):
            client(Prompt("", "Action 2:"), "action")

    def test_function(self):
        """Test answering with a function of prompt and role."""
        client = scripted(lambda prompt, role: f"{role}:{prompt.user}")
        assert client(Prompt("", "x"), "critique") == "critique:x"
        assert client.backend.remaining is None


class TestCacheBackend:
    """Tests for :class:`~reflect_kit.llm_client.CacheBackend`."""

    def test_record_then_replay(self, tmp_path: Path):
        """Test that replay answers from the recorded file only."""
        path = tmp_path / "cache.jsonl"
        inner = ScriptedBackend(["look", "open fridge 1"])
        recorder = cache(inner, path)
        first = recorder(Prompt("", "a"), "action")
        again = recorder(Prompt("", "a"), "action")
        second = recorder(Prompt("", "b"), "reflection")
        assert (first, again, second) == ("look", "look", "open fridge 1")
        assert inner.calls == 2
        assert recorder.backend.hits == 1
        assert recorder.backend.misses == 2
        lines = path.read_text(encoding="utf-8").splitlines()
        assert [json.loads(line)["role"] for line in lines] == [
            "action",
            "reflection",
        ]
        replayer = cache(None, path, mode="replay")
        assert replayer(Prompt("", "b"), "reflection") == "open fridge 1"
        assert replayer.calls["reflection"] == 1

    def test_replay_miss(self, tmp_path: Path):
        """Test that replay mode never reaches a backend."""
        client = cache(None, tmp_path / "cache.jsonl", mode="replay")
        with pytest.raises(CacheMissError) as exc_info:
            client(Prompt("", "a"), "action")
        assert len(exc_info.value.digest) == 64

    def test_corrupt_line(self, tmp_path: Path):
        """Test that a corrupt entry names its line."""
        path = tmp_path / "cache.jsonl"
        entry = {"digest": "abc", "response": "look"}
        path.write_text(
            json.dumps(entry) + "\n\n{not json\n", encoding="utf-8"
        )
        with pytest.raises(CacheLoadError) as exc_info:
            CacheBackend(path, mode="replay")
        assert exc_info.value.line == 3

    def test_off(self, tmp_path: Path):
        """Test that the off mode neither reads nor writes the file."""
        path = tmp_path / "cache.jsonl"
        client = cache(ScriptedBackend(["a", "b"]), path, mode="off")
        client(Prompt("", "x"), "action")
        client(Prompt("", "x"), "action")
        assert not path.exists()
        assert client.backend.inner.calls == 2

    @pytest.mark.parametrize(
        "mode,inner",
        [
            pytest.param("sometimes", ScriptedBackend([]), id="bad-mode"),
            pytest.param("record", None, id="record-without-inner"),
        ],
    )
    def test_invalid(self, tmp_path: Path, mode, inner):
        """Test invalid cache configurations."""
        with pytest.raises(ValueError):
            CacheBackend(tmp_path / "cache.jsonl", inner, mode)


class TestLlmClient:
    """Tests for :class:`~reflect_kit.llm_client.LlmClient`."""

    def test_accounting(self):
        """Test the per-role counters and the observer."""
        observer = Observer()
        client = scripted(["a", "b", "c"], observer=observer)
        client(Prompt("", "x"), "action")
        client(Prompt("", "x"), "action")
        client(Prompt("", "x"), "summarization")
        assert client.calls == {
            "action": 2,
            "reflection": 0,
            "summarization": 1,
            "critique": 0,
        }
        assert client.total_calls == 3
        assert [record.role for record in observer.calls] == [
            "action",
            "action",
            "summarization",
        ]
        assert [record.response for record in client.records] == [
            "a",
            "b",
            "c",
        ]

    def test_every_role_listed(self):
        """Test that fresh clients report zero calls per role."""
        assert scripted([]).calls == {role: 0 for role in ROLES}

    @pytest.mark.parametrize(
        "history, kept",
        [
            pytest.param(2, ["c", "d"], id="last-two"),
            pytest.param(0, [], id="none"),
            pytest.param(None, ["a", "b", "c", "d"], id="all"),
        ],
    )
    def test_history(self, history, kept):
        """Test that only the most recent call records are retained."""
        client = LlmClient(
            LlmSettings(),
            ScriptedBackend(["a", "b", "c", "d"]),
            history=history,
        )
        for _ in range(4):
            client(Prompt("", "Act."), "action")
        assert [record.response for record in client.records] == kept
        assert client.calls["action"] == 4

    def test_negative_history(self):
        """Test that a negative history length is rejected."""
        with pytest.raises(ValueError, match="history"):
            LlmClient(LlmSettings(), ScriptedBackend([]), history=-1)

    def test_unknown_role(self):
        """Test that roles outside the fixed set are rejected."""
        with pytest.raises(ValueError, match="role"):
            scripted(["a"])(Prompt("", "x"), "planning")

    def test_empty_prompt(self):
        """Test that empty prompts are rejected."""
        with pytest.raises(ValueError, match="empty"):
            scripted(["a"])(Prompt(" ", "\n"), "action")
