from .base import (
    AuthError,
    BackendError,
    BackendUnavailable,
    CacheMiss,
    ChatBackend,
    ChatRequest,
    ChatResponse,
    ClientRequestError,
    CountingBackend,
    ProtocolError,
    Purpose,
    RequestTag,
    Usage,
    record_key,
)
from .live import OpenAIChatBackend, TokenBucket
from .oracle import EvidenceOracle
from .replay import RecordingBackend, ReplayBackend, ReplayCache
from .scripted import ScriptedBackend, ScriptError

__all__ = [
    "AuthError",
    "BackendError",
    "BackendUnavailable",
    "CacheMiss",
    "ChatBackend",
    "ChatRequest",
    "ChatResponse",
    "ClientRequestError",
    "CountingBackend",
    "EvidenceOracle",
    "OpenAIChatBackend",
    "ProtocolError",
    "Purpose",
    "RecordingBackend",
    "ReplayBackend",
    "ReplayCache",
    "RequestTag",
    "ScriptError",
    "ScriptedBackend",
    "TokenBucket",
    "Usage",
    "record_key",
]
