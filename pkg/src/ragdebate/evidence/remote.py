"""HTTP retrieval clients: web search providers and a hosted passage retriever.

Search results are normalized to ``{title, snippet, url, rank}``; only the
snippet ever becomes evidence text.
"""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import httpx

from .types import Hit, RetrievalError, SearchAuthError, SearchQuotaError


def _raise_for_status(resp: httpx.Response, provider: str) -> None:
    code = resp.status_code
    if code < 400:
        return
    if code in (401, 403):
        raise SearchAuthError(f"{provider}: credentials rejected (HTTP {code})", code, provider)
    if code == 429:
        raise SearchQuotaError(f"{provider}: quota or rate limit exceeded (HTTP 429)", code, provider)
    raise RetrievalError(f"{provider}: HTTP {code}: {resp.text[:200]}", code, provider)


class _RateLimited:
    """Minimum spacing between requests to one provider, shared across threads."""

    def __init__(self, min_interval: float = 0.0, sleep: Callable[[float], None] = time.sleep):
        self._min_interval = min_interval
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def _wait_turn(self) -> None:
        if self._min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._next - now
            self._next = max(now, self._next) + self._min_interval
        if wait > 0:
            self._sleep(wait)


def normalize_results(items: Sequence[Dict[str, Any]], title_key="title", snippet_key="snippet", url_key="link") -> List[Hit]:
    hits = []
    for rank, item in enumerate(items):
        snippet = item.get(snippet_key)
        if not snippet:
            continue
        hits.append(
            Hit(
                doc_id=str(item.get(url_key) or rank),
                text=" ".join(str(snippet).split()),
                title=item.get(title_key),
                url=item.get(url_key),
                rank=len(hits),
            )
        )
    return hits


class GoogleCustomSearch(_RateLimited):
    """Google Programmable Search JSON API (``GOOGLE_API_KEY`` / ``GOOGLE_CSE_ID``)."""

    name = "google_cse"
    endpoint = "https://www.googleapis.com/customsearch/v1"

    def __init__(self, api_key=None, cx=None, timeout=20.0, min_interval=0.0, transport=None):
        super().__init__(min_interval)
        self.api_key = api_key or os.environ.get("GOOGLE_API_KEY", "")
        self.cx = cx or os.environ.get("GOOGLE_CSE_ID", "")
        if not self.api_key or not self.cx:
            raise SearchAuthError("google_cse: GOOGLE_API_KEY and GOOGLE_CSE_ID must be set", provider=self.name)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def search(self, query: str, k: int) -> List[Hit]:
        if k <= 0:
            return []
        self._wait_turn()
        params = {"key": self.api_key, "cx": self.cx, "q": query, "num": min(k, 10)}
        try:
            resp = self._client.get(self.endpoint, params=params)
        except httpx.HTTPError as exc:
            raise RetrievalError(f"{self.name}: {exc}", provider=self.name) from exc
        _raise_for_status(resp, self.name)
        try:
            items = resp.json().get("items", [])
        except ValueError as exc:
            raise RetrievalError(f"{self.name}: malformed JSON", resp.status_code, self.name) from exc
        return normalize_results(items)[:k]


class SerperSearch(_RateLimited):
    """serper.dev Google search (``SERPER_API_KEY``)."""

    name = "serper"
    endpoint = "https://google.serper.dev/search"

    def __init__(self, api_key=None, timeout=20.0, min_interval=0.0, transport=None):
        super().__init__(min_interval)
        self.api_key = api_key or os.environ.get("SERPER_API_KEY", "")
        if not self.api_key:
            raise SearchAuthError("serper: SERPER_API_KEY must be set", provider=self.name)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def search(self, query: str, k: int) -> List[Hit]:
        if k <= 0:
            return []
        self._wait_turn()
        try:
            resp = self._client.post(
                self.endpoint,
                headers={"X-API-KEY": self.api_key, "Content-Type": "application/json"},
                json={"q": query, "num": min(k, 10)},
            )
        except httpx.HTTPError as exc:
            raise RetrievalError(f"{self.name}: {exc}", provider=self.name) from exc
        _raise_for_status(resp, self.name)
        try:
            items = resp.json().get("organic", [])
        except ValueError as exc:
            raise RetrievalError(f"{self.name}: malformed JSON", resp.status_code, self.name) from exc
        return normalize_results(items)[:k]


class FixtureSearch:
    """Offline provider reading canned results from a JSON file keyed by query.

    Values are lists of ``{title, snippet, url}`` objects. A value of the form
    ``{"status": 429}`` simulates a provider error for that query.
    """

    name = "fixture"

    def __init__(self, data: Union[str, Path, Dict[str, Any]]):
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text(encoding="utf-8"))
        self.data: Dict[str, Any] = dict(data)

    def search(self, query: str, k: int) -> List[Hit]:
        if k <= 0:
            return []
        entry = self.data.get(query, [])
        if isinstance(entry, dict) and "status" in entry:
            status = int(entry["status"])
            _raise_for_status(httpx.Response(status, text=entry.get("body", "")), self.name)
            raise RetrievalError(f"fixture: unexpected status {status}", status, self.name)
        return normalize_results(entry, url_key="url")[:k]


class DenseServiceRetriever:
    """Client for a self-hosted passage retriever.

    Sends ``POST {url}`` with ``{"query": ..., "k": ...}`` and expects
    ``{"passages": [{"id", "title", "text", "score"}, ...]}`` in rank order.
    """

    name = "dense_service"

    def __init__(self, url: Optional[str] = None, timeout: float = 30.0, transport=None):
        self.url = url or os.environ.get("RAGDEBATE_RETRIEVER_URL", "")
        if not self.url:
            raise RetrievalError("dense_service: no retriever URL configured", provider=self.name)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def retrieve(self, query: str, k: int) -> List[Hit]:
        if k <= 0:
            return []
        try:
            resp = self._client.post(self.url, json={"query": query, "k": k})
        except httpx.HTTPError as exc:
            raise RetrievalError(f"{self.name}: unreachable ({exc})", provider=self.name) from exc
        _raise_for_status(resp, self.name)
        try:
            rows = resp.json()["passages"]
            return [
                Hit(str(r["id"]), r["text"], r.get("title"), None, r.get("score"), rank)
                for rank, r in enumerate(rows[:k])
            ]
        except (ValueError, KeyError, TypeError) as exc:
            raise RetrievalError(f"{self.name}: malformed response ({exc})", resp.status_code, self.name) from exc
