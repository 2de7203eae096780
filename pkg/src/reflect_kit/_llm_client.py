"""Completion client with HTTP, scripted and record/replay backends."""
import hashlib
import json
import logging
import os
import threading
import time
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import (
    Any,
    Callable,
    Deque,
    Dict,
    Mapping,
    NamedTuple,
    Optional,
    Protocol,
    Sequence,
    Union,
)
from warnings import warn

import httpx
from tenacity import (
    Retrying,
    before_sleep_log,
    retry_if_exception,
    stop_after_attempt,
    wait_random_exponential,
)

from reflect_kit._prompts import Prompt

_logger = logging.getLogger(__name__)

ROLES = ("action", "reflection", "summarization", "critique")
CACHE_MODES = ("off", "record", "replay")
_TRANSIENT_STATUS = frozenset({408, 409, 429})
_REJECTED_STATUS = frozenset({400, 422})
DEFAULT_HISTORY = 256

Script = Union[
    Sequence[str], Mapping[str, str], Callable[[Prompt, str], str]
]


class LlmClientError(Exception):
    """Base class of completion client failures."""
    pass


class LlmTransportError(LlmClientError):
    """A completion request failed after all retries."""

    def __init__(
        self, status: Optional[int], role: str, detail: str = ""
    ) -> None:
        self.status = status
        self.role = role
        message = f"Completion failed (status={status}, role={role})."
        super().__init__(f"{message} {detail}".strip())


class ScriptExhaustedError(LlmClientError):
    """A scripted backend ran out of responses."""
    pass


class CacheMissError(LlmClientError):
    """A replay-only cache has no response for a request."""

    def __init__(self, digest: str) -> None:
        self.digest = digest
        super().__init__(f"No cached response for request {digest}.")


class CacheLoadError(LlmClientError):
    """A cache file holds a corrupt line."""

    def __init__(self, path: "Union[str, Path]", line: int) -> None:
        self.line = line
        super().__init__(f"Corrupt cache entry in {path} at line {line}.")


class UnsupportedParameterWarning(Warning):
    """The endpoint rejected optional sampling parameters."""
    pass


@dataclass(frozen=True)
class RetryPolicy:
    """Retry schedule for transient HTTP failures.

    Waits are drawn from a random exponential schedule scaled by `backoff`
    seconds and capped at `max_backoff`.
    """

    max_attempts: int = 6
    backoff: float = 1.0
    max_backoff: float = 60.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError(
                "Cannot retry, `max_attempts` must be at least 1."
            )
        if self.backoff < 0 or self.max_backoff < 0:
            raise ValueError("Cannot retry, backoff must not be negative.")


@dataclass(frozen=True)
class LlmSettings:
    """Model, sampling and transport settings of a completion client.

    Parameters
    ----------
    endpoint : str
        Base URL of an OpenAI-compatible API, ``/chat/completions`` is
        appended.
    model : str
        Model name sent with each request.
    temperature, top_p, top_k, repetition_penalty : optional
        Sampling parameters, greedy decoding by default.
    max_tokens : int, optional
        Completion length cap.
    timeout : float, optional
        Request timeout in seconds.
    retry : RetryPolicy, optional
        Retry schedule of transient failures.
    api_key_env : str, optional
        Environment variable holding the API key.
    """

    endpoint: str = ""
    model: str = "scripted"
    temperature: float = 0.0
    top_p: float = 0.7
    top_k: int = 50
    repetition_penalty: float = 1.0
    max_tokens: int = 256
    timeout: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    api_key_env: str = "OPENAI_API_KEY"

    def __post_init__(self) -> None:
        problems = []
        if self.temperature < 0:
            problems.append("`temperature` must not be negative")
        if not 0 < self.top_p <= 1:
            problems.append("`top_p` must lie in (0, 1]")
        if self.top_k < 1:
            problems.append("`top_k` must be at least 1")
        if self.repetition_penalty <= 0:
            problems.append("`repetition_penalty` must be positive")
        if self.max_tokens < 1:
            problems.append("`max_tokens` must be at least 1")
        if self.timeout <= 0:
            problems.append("`timeout` must be positive")
        if problems:
            _logger.error("Invalid LLM settings: %s.", "; ".join(problems))
            raise ValueError(
                f"Cannot configure client, {'; '.join(problems)}."
            )

    def sampling(self) -> Dict[str, Any]:
        """Fields that influence a completion, used by the request digest."""
        return {
            "model": self.model,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "repetition_penalty": self.repetition_penalty,
            "max_tokens": self.max_tokens,
        }

    def to_document(self) -> Dict[str, Any]:
        return asdict(self)


def request_digest(settings: LlmSettings, prompt: Prompt) -> str:
    """Stable hash of the sampling settings and the prompt.

    The digest is the SHA-256 hex digest of the UTF-8 encoded JSON object
    ``{"settings": ..., "system": ..., "user": ...}`` serialized with sorted
    keys, compact separators and non-ASCII characters kept verbatim.

    Examples
    --------
    >>> digest = request_digest(LlmSettings(), Prompt("", "Act."))
    >>> digest == request_digest(LlmSettings(), Prompt("", "Act."))
    True
    >>> len(digest)
    64
    """
    payload = {
        "settings": settings.sampling(),
        "system": prompt.system,
        "user": prompt.user,
    }
    canonical = json.dumps(
        payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class CallRecord(NamedTuple):
    """One completed model call."""

    role: str
    digest: str
    response: str
    latency: float
    timestamp: float

    def to_document(self) -> Dict[str, Any]:
        return self._asdict()


class Backend(Protocol):
    """Anything able to answer a prompt."""

    def complete(
        self, settings: LlmSettings, prompt: Prompt, role: str, digest: str
    ) -> str:
        ...  # pragma: no cover


def _is_transient(error: BaseException) -> bool:
    if isinstance(error, httpx.HTTPStatusError):
        status = error.response.status_code
        return status in _TRANSIENT_STATUS or status >= 500
    return isinstance(error, httpx.TransportError)


class HttpBackend:
    """OpenAI-compatible chat-completions backend.

    Parameters
    ----------
    client : httpx.Client, optional
        Client used for requests, a fresh one by default.
    api_key : str, optional
        Bearer token, read from ``settings.api_key_env`` when not given.
    """

    def __init__(
        self,
        client: Optional[httpx.Client] = None,
        api_key: Optional[str] = None,
    ) -> None:
        self.client = client or httpx.Client()
        self.api_key = api_key
        self.network_calls = 0
        self.send_extras = True
        self._lock = threading.Lock()

    def _body(self, settings: LlmSettings, prompt: Prompt) -> Dict[str, Any]:
        messages = []
        if prompt.system:
            messages.append({"role": "system", "content": prompt.system})
        messages.append({"role": "user", "content": prompt.user})
        body: Dict[str, Any] = {
            "model": settings.model,
            "messages": messages,
            "temperature": settings.temperature,
            "top_p": settings.top_p,
            "max_tokens": settings.max_tokens,
        }
        if self.send_extras:
            body["top_k"] = settings.top_k
            body["repetition_penalty"] = settings.repetition_penalty
        return body

    def _post(
        self, settings: LlmSettings, body: Dict[str, Any]
    ) -> httpx.Response:
        with self._lock:
            self.network_calls += 1
        api_key = self.api_key or os.environ.get(settings.api_key_env)
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        response = self.client.post(
            f"{settings.endpoint.rstrip('/')}/chat/completions",
            json=body,
            headers=headers,
            timeout=settings.timeout,
        )
        response.raise_for_status()
        return response

    def _send(
        self, settings: LlmSettings, prompt: Prompt
    ) -> httpx.Response:
        policy = settings.retry
        retrying = Retrying(
            stop=stop_after_attempt(policy.max_attempts),
            wait=wait_random_exponential(
                multiplier=policy.backoff, max=policy.max_backoff
            ),
            retry=retry_if_exception(_is_transient),
            before_sleep=before_sleep_log(_logger, logging.DEBUG),
            reraise=True,
        )
        return retrying(self._post, settings, self._body(settings, prompt))

    def complete(
        self, settings: LlmSettings, prompt: Prompt, role: str, digest: str
    ) -> str:
        """Post a chat-completions request and return the message content.

        Raises
        ------
        LlmTransportError
            If the request keeps failing or the reply is malformed.

        Warns
        -----
        UnsupportedParameterWarning
            When the endpoint rejects ``top_k``/``repetition_penalty``; they
            are dropped for the rest of the client's lifetime.
        """
        if not settings.endpoint:
            raise LlmTransportError(None, role, "No endpoint configured.")
        try:
            try:
                response = self._send(settings, prompt)
            except httpx.HTTPStatusError as err:
                status = err.response.status_code
                if status not in _REJECTED_STATUS or not self.send_extras:
                    raise
                warn(
                    f"Endpoint answered {status}, resending without "
                    f"`top_k` and `repetition_penalty`.",
                    UnsupportedParameterWarning,
                    stacklevel=3,
                )
                self.send_extras = False
                response = self._send(settings, prompt)
        except httpx.HTTPStatusError as err:
            _logger.error("Completion failed for role %s.", role)
            raise LlmTransportError(err.response.status_code, role) from err
        except httpx.TransportError as err:
            _logger.error("Completion failed for role %s.", role)
            raise LlmTransportError(None, role, str(err)) from err
        try:
            return str(response.json()["choices"][0]["message"]["content"])
        except (ValueError, KeyError, IndexError, TypeError) as err:
            raise LlmTransportError(
                response.status_code, role, "Malformed completion body."
            ) from err


class ScriptedBackend:
    """Deterministic playback of canned responses.

    Parameters
    ----------
    responses : sequence, mapping or callable
        A queue answered in order, a map from request digest to response
        or a function of the prompt and role.

    Examples
    --------
    >>> backend = ScriptedBackend(["go to fridge 1"])
    >>> backend.complete(LlmSettings(), Prompt("", "Act."), "action", "")
    'go to fridge 1'
    >>> backend.remaining
    0
    """

    def __init__(
        self,
        responses: Script,
    ) -> None:
        self._queue: Optional[Deque[str]] = None
        self._table: Optional[Mapping[str, str]] = None
        self._function: Optional[Callable[[Prompt, str], str]] = None
        if callable(responses):
            self._function = responses
        elif isinstance(responses, Mapping):
            self._table = dict(responses)
        else:
            self._queue = deque(responses)
        self.calls = 0
        self._lock = threading.Lock()

    @property
    def remaining(self) -> Optional[int]:
        """Responses left in the queue, ``None`` for other scripts."""
        return None if self._queue is None else len(self._queue)

    def complete(
        self, settings: LlmSettings, prompt: Prompt, role: str, digest: str
    ) -> str:
        with self._lock:
            self.calls += 1
            if self._function is not None:
                return self._function(prompt, role)
            if self._table is not None:
                try:
                    return self._table[digest]
                except KeyError as err:
                    raise ScriptExhaustedError(
                        f"No scripted response for request {digest}."
                    ) from err
            assert self._queue is not None
            if not self._queue:
                raise ScriptExhaustedError(
                    f"Script exhausted at call {self.calls} ({role})."
                )
            return self._queue.popleft()


class CacheBackend:
    """Record/replay cache of completions in a JSON Lines file.

    Parameters
    ----------
    path : str or Path
        Cache file, one call record per line.
    inner : Backend, optional
        Backend answering misses, required unless `mode` is ``"replay"``.
    mode : {"record", "replay", "off"}, optional
        ``record`` serves hits and appends misses, ``replay`` raises on a
        miss and ``off`` bypasses the cache.

    Raises
    ------
    CacheLoadError
        If a line of an existing cache file is corrupt.
    """

    def __init__(
        self,
        path: "Union[str, Path]",
        inner: Optional[Backend] = None,
        mode: str = "record",
    ) -> None:
        if mode not in CACHE_MODES:
            raise ValueError(
                f"Cannot open cache, `mode` must be one of {CACHE_MODES}."
            )
        if inner is None and mode != "replay":
            raise ValueError(
                f"Cannot open cache, mode `{mode}` needs an `inner` backend."
            )
        self.path = Path(path)
        self.inner = inner
        self.mode = mode
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()
        self._entries = self._load() if mode != "off" else {}

    def _load(self) -> Dict[str, str]:
        entries: Dict[str, str] = {}
        if not self.path.exists():
            return entries
        with self.path.open(encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    entries.setdefault(
                        str(record["digest"]), str(record["response"])
                    )
                except (ValueError, KeyError, TypeError) as err:
                    _logger.error("Corrupt cache line %d.", number)
                    raise CacheLoadError(self.path, number) from err
        _logger.debug("Loaded %d cached completions.", len(entries))
        return entries

    def __len__(self) -> int:
        return len(self._entries)

    def complete(
        self, settings: LlmSettings, prompt: Prompt, role: str, digest: str
    ) -> str:
        if self.mode == "off":
            assert self.inner is not None
            return self.inner.complete(settings, prompt, role, digest)
        with self._lock:
            cached = self._entries.get(digest)
            if cached is not None:
                self.hits += 1
                _logger.debug("Cache hit %s.", digest[:12])
                return cached
        if self.mode == "replay" or self.inner is None:
            _logger.error("Cache miss %s in replay mode.", digest)
            raise CacheMissError(digest)
        started = time.perf_counter()
        response = self.inner.complete(settings, prompt, role, digest)
        record = CallRecord(
            role, digest, response, time.perf_counter() - started, time.time()
        )
        line = json.dumps(record.to_document(), ensure_ascii=False) + "\n"
        with self._lock:
            self.misses += 1
            if digest not in self._entries:
                self._entries[digest] = response
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(line)
                    handle.flush()
        return response


class CallObserver(Protocol):
    """Receives every completed call, e.g. a trace writer."""

    def llm_call(self, record: CallRecord, prompt: Prompt) -> None:
        ...  # pragma: no cover


class LlmClient:
    """Completion callable with per-role call accounting.

    Parameters
    ----------
    settings : LlmSettings
        Model and sampling settings.
    backend : Backend
        Backend answering requests.
    observer : CallObserver, optional
        Notified after every call.
    history : int, optional
        How many recent :class:`CallRecord` to keep in :attr:`records`,
        `None` keeps all of them. Defaults to 256.

    Examples
    --------
    >>> client = scripted(["go to fridge 1", "open fridge 1"])
    >>> client(Prompt("", "Act."), "action")
    'go to fridge 1'
    >>> client.calls["action"]
    1
    """

    def __init__(
        self,
        settings: LlmSettings,
        backend: Backend,
        observer: Optional[CallObserver] = None,
        history: Optional[int] = DEFAULT_HISTORY,
    ) -> None:
        if history is not None and history < 0:
            _logger.error("Invalid input: negative call history.")
            raise ValueError("Cannot keep calls, `history` must be >= 0.")
        self.settings = settings
        self.backend = backend
        self.observer = observer
        self.records: Deque[CallRecord] = deque(maxlen=history)
        self._calls: Counter[str] = Counter()
        self._lock = threading.Lock()

    @property
    def calls(self) -> Dict[str, int]:
        """Number of calls per role, every role present."""
        with self._lock:
            return {role: self._calls[role] for role in ROLES}

    @property
    def total_calls(self) -> int:
        with self._lock:
            return sum(self._calls.values())

    def complete(self, prompt: Prompt, role: str) -> str:
        """Answer a prompt.

        Raises
        ------
        ValueError
            If `role` is unknown or the prompt is empty.
        LlmTransportError
            If the HTTP backend gives up.
        """
        if role not in ROLES:
            _logger.error("Invalid input: unknown role `%s`.", role)
            raise ValueError(f"Cannot complete, `role` must be in {ROLES}.")
        if not prompt.text.strip():
            _logger.error("Invalid input: empty prompt.")
            raise ValueError("Cannot complete, `prompt` is empty.")
        digest = request_digest(self.settings, prompt)
        started = time.perf_counter()
        response = self.backend.complete(self.settings, prompt, role, digest)
        record = CallRecord(
            role, digest, response, time.perf_counter() - started, time.time()
        )
        with self._lock:
            self._calls[role] += 1
            self.records.append(record)
        _logger.debug("%s call answered: %r", role, response[:80])
        if self.observer is not None:
            self.observer.llm_call(record, prompt)
        return response

    __call__ = complete


def scripted(
    responses: Script,
    settings: Optional[LlmSettings] = None,
    observer: Optional[CallObserver] = None,
) -> LlmClient:
    """Client answering from a script, see :class:`ScriptedBackend`."""
    return LlmClient(
        settings or LlmSettings(), ScriptedBackend(responses), observer
    )


def cache(
    inner: Optional[Backend],
    path: "Union[str, Path]",
    mode: str = "record",
    settings: Optional[LlmSettings] = None,
    observer: Optional[CallObserver] = None,
) -> LlmClient:
    """Client answering through a record/replay cache.

    Examples
    --------
    >>> import tempfile, pathlib
    >>> path = pathlib.Path(tempfile.mkdtemp()) / "cache.jsonl"
    >>> recorder = cache(ScriptedBackend(["look"]), path)
    >>> recorder(Prompt("", "Act."), "action")
    'look'
    >>> cache(None, path, mode="replay")(Prompt("", "Act."), "action")
    'look'
    """
    return LlmClient(
        settings or LlmSettings(), CacheBackend(path, inner, mode), observer
    )
