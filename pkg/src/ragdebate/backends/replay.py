"""Content-addressed record/replay cache.

The cache file is JSONL, one ``{digest, request, response}`` object per line.
Identical requests share a digest but keep every recorded response in order,
so two agents that sent the same prompt get back their own answers on replay.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Union

from .base import CacheMiss, ChatBackend, ChatRequest, ChatResponse, record_key


class ReplayCache:
    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._entries: Dict[str, List[ChatResponse]] = defaultdict(list)
        if self.path is not None and self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        row = json.loads(line)
                        self._entries[row["digest"]].append(ChatResponse.from_dict(row["response"]))
                    except (ValueError, KeyError) as exc:
                        raise ValueError(f"{self.path}:{lineno}: bad cache line ({exc})") from exc

    def __len__(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def __contains__(self, digest: str) -> bool:
        return digest in self._entries

    def responses(self, digest: str) -> List[ChatResponse]:
        return list(self._entries.get(digest, ()))

    def append(self, req: ChatRequest, resp: ChatResponse) -> str:
        digest = record_key(req)
        row = {"digest": digest, "request": req.to_dict(), "response": resp.to_dict()}
        with self._lock:
            self._entries[digest].append(resp)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        return digest


class RecordingBackend:
    """Passes requests to ``inner`` and appends every exchange to ``cache``."""

    def __init__(self, inner: ChatBackend, cache: ReplayCache):
        self.inner = inner
        self.cache = cache

    def complete(self, req: ChatRequest) -> ChatResponse:
        resp = self.inner.complete(req)
        self.cache.append(req, resp)
        return resp


class ReplayBackend:
    """Serves responses from a cache without touching the network.

    Each digest has its own cursor, so repeated identical requests walk
    through the recorded responses in order. In strict mode a miss raises
    :class:`CacheMiss`; otherwise the request goes to ``fallback`` and the
    answer is recorded.
    """

    def __init__(self, cache: ReplayCache, strict: bool = True, fallback: Optional[ChatBackend] = None):
        if not strict and fallback is None:
            raise ValueError("non-strict replay needs a fallback backend")
        self.cache = cache
        self.strict = strict
        self.fallback = fallback
        self._lock = threading.Lock()
        self._cursor: Dict[str, int] = defaultdict(int)
        self.hits = 0
        self.misses = 0

    def complete(self, req: ChatRequest) -> ChatResponse:
        digest = record_key(req)
        with self._lock:
            recorded = self.cache.responses(digest)
            pos = self._cursor[digest]
            if pos < len(recorded):
                self._cursor[digest] = pos + 1
                self.hits += 1
                return recorded[pos]
            self.misses += 1
        if self.strict:
            tag = req.tag
            raise CacheMiss(
                f"no cached response for digest {digest[:12]} "
                f"(purpose={tag.purpose.value} agent={tag.agent_id} round={tag.round}, occurrence {pos + 1})"
            )
        resp = self.fallback.complete(req)
        with self._lock:
            self.cache.append(req, resp)
            self._cursor[digest] += 1
        return resp
