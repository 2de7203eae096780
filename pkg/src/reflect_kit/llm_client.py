"""Uniform completion interface with per-role call accounting.

A :class:`LlmClient` pairs :class:`LlmSettings` with a backend: the HTTP
backend speaks the OpenAI-compatible chat-completions protocol, the scripted
backend plays canned responses back and the cache backend records and
replays completions keyed by :func:`request_digest`.
"""

from reflect_kit._llm_client import (
    CACHE_MODES,
    ROLES,
    Backend,
    CacheBackend,
    CacheLoadError,
    CacheMissError,
    CallObserver,
    CallRecord,
    HttpBackend,
    LlmClient,
    LlmClientError,
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

__all__ = [
    "CACHE_MODES",
    "ROLES",
    "Backend",
    "CacheBackend",
    "CacheLoadError",
    "CacheMissError",
    "CallObserver",
    "CallRecord",
    "HttpBackend",
    "LlmClient",
    "LlmClientError",
    "LlmSettings",
    "LlmTransportError",
    "Prompt",
    "RetryPolicy",
    "ScriptedBackend",
    "ScriptExhaustedError",
    "UnsupportedParameterWarning",
    "cache",
    "request_digest",
    "scripted",
]
