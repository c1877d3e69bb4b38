"""Deterministic in-process backends for tests and offline dry runs."""

from __future__ import annotations

import threading
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

from .base import ChatRequest, ChatResponse, Purpose

Responder = Callable[[ChatRequest], str]
ScriptKey = Tuple[Union[Purpose, str], Optional[str], Optional[int]]


class ScriptError(LookupError):
    pass


class ScriptedBackend:
    """Answers each request with ``responder(request)``.

    Every request is logged in call order, which is what the protocol tests
    inspect to check visibility rules and call counts.
    """

    def __init__(self, responder: Responder):
        self.responder = responder
        self._lock = threading.Lock()
        self.requests: List[ChatRequest] = []

    @property
    def call_count(self) -> int:
        return len(self.requests)

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(req)
        return ChatResponse(self.responder(req))

    @classmethod
    def from_table(cls, table: Mapping[ScriptKey, Union[str, Responder]], default: Optional[str] = None):
        """Build a backend from ``(purpose, agent_id, round) -> reply`` entries.

        ``None`` in the agent or round position is a wildcard. Lookup tries the
        most specific key first. Values may be strings or responders.
        """
        norm: Dict[Tuple[str, Optional[str], Optional[int]], Union[str, Responder]] = {
            (Purpose(p).value, a, r): v for (p, a, r), v in table.items()
        }

        def respond(req: ChatRequest) -> str:
            p, a, r = req.tag.purpose.value, req.tag.agent_id, req.tag.round
            for key in ((p, a, r), (p, a, None), (p, None, r), (p, None, None)):
                if key in norm:
                    value = norm[key]
                    return value(req) if callable(value) else value
            if default is not None:
                return default
            raise ScriptError(f"no scripted reply for purpose={p} agent={a} round={r}")

        return cls(respond)
