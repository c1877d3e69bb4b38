from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Protocol, runtime_checkable


class Purpose(str, Enum):
    SELECTION = "selection"
    TALK = "talk"
    JUDGE = "judge"
    SUMMARY = "summary"
    EVAL = "eval"


@dataclass(frozen=True)
class RequestTag:
    role: str
    agent_id: str
    round: int
    purpose: Purpose

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["purpose"] = self.purpose.value
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RequestTag":
        return cls(d["role"], d["agent_id"], int(d["round"]), Purpose(d["purpose"]))


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float
    tag: RequestTag

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "system_prompt": self.system_prompt,
            "user_prompt": self.user_prompt,
            "temperature": self.temperature,
            "tag": self.tag.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ChatRequest":
        return cls(d["system_prompt"], d["user_prompt"], float(d["temperature"]), RequestTag.from_dict(d["tag"]))


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: Usage = field(default_factory=Usage)
    provider_latency: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"text": self.text, "usage": asdict(self.usage), "provider_latency": self.provider_latency}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ChatResponse":
        usage = d.get("usage") or {}
        return cls(
            d["text"],
            Usage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
            float(d.get("provider_latency", 0.0)),
        )


class BackendError(RuntimeError):
    """Base class for chat backend failures."""


class AuthError(BackendError):
    """Credentials rejected; never retried."""


class ClientRequestError(BackendError):
    """Provider rejected the request (4xx other than 429); never retried."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


class BackendUnavailable(BackendError):
    """Retries exhausted on transient failures."""


class ProtocolError(BackendError):
    """Provider answered with something that is not a chat completion."""


class CacheMiss(BackendError):
    """Replay cache has no (remaining) response for a request."""


@runtime_checkable
class ChatBackend(Protocol):
    def complete(self, req: ChatRequest) -> ChatResponse: ...


def record_key(req: ChatRequest) -> str:
    """Content hash over the fields that determine a completion.

    The tag is deliberately excluded: two agents sending identical prompts
    share a digest.
    """
    payload = json.dumps(
        [req.system_prompt, req.user_prompt, repr(float(req.temperature))],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class CountingBackend:
    """Wraps a backend and counts calls; safe to share across threads."""

    def __init__(self, inner: ChatBackend):
        self.inner = inner
        self._lock = threading.Lock()
        self.calls = 0

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
        return self.inner.complete(req)
