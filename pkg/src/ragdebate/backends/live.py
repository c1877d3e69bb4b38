"""OpenAI-compatible chat-completions client."""

from __future__ import annotations

import logging
import os
import threading
import time
from typing import Callable, Dict, Mapping, Optional

import httpx

from .base import (
    AuthError,
    BackendUnavailable,
    ChatRequest,
    ChatResponse,
    ClientRequestError,
    ProtocolError,
    Usage,
)

log = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-3.5-turbo"


class TokenBucket:
    """Blocking token bucket; ``rate`` tokens per second, burst ``capacity``."""

    def __init__(self, rate: float, capacity: Optional[float] = None, clock=time.monotonic, sleep=time.sleep):
        self.rate = float(rate)
        self.capacity = float(capacity if capacity is not None else max(1.0, rate))
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class OpenAIChatBackend:
    """Blocking chat client shared by all debates in a process.

    Transient failures (5xx, 429, timeouts, connection errors) are retried
    with exponential backoff capped at ``max_backoff``. Auth failures and
    other 4xx responses are raised immediately.
    """

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        model: Optional[str] = None,
        role_models: Optional[Mapping[str, str]] = None,
        max_retries: int = 5,
        backoff: float = 1.0,
        max_backoff: float = 30.0,
        timeout: float = 60.0,
        max_concurrency: int = 8,
        requests_per_second: Optional[float] = None,
        max_tokens: Optional[int] = None,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = (base_url or os.environ.get("OPENAI_BASE_URL") or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("OPENAI_API_KEY", "")
        self.model = model or os.environ.get("RAGDEBATE_MODEL") or DEFAULT_MODEL
        self.role_models: Dict[str, str] = dict(role_models or {})
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.max_tokens = max_tokens
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_concurrency)
        self._bucket = TokenBucket(requests_per_second, sleep=sleep) if requests_per_second else None
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def close(self) -> None:
        self._client.close()

    def model_for(self, role: str) -> str:
        return self.role_models.get(role, self.model)

    def payload(self, req: ChatRequest) -> dict:
        body = {
            "model": self.model_for(req.tag.role),
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
        }
        if self.max_tokens is not None:
            body["max_tokens"] = self.max_tokens
        return body

    def _delay(self, attempt: int, retry_after: Optional[str]) -> float:
        if retry_after:
            try:
                return min(float(retry_after), self.max_backoff)
            except ValueError:
                pass
        return min(self.backoff * (2 ** attempt), self.max_backoff)

    def complete(self, req: ChatRequest) -> ChatResponse:
        url = f"{self.base_url}/chat/completions"
        body = self.payload(req)
        last_error = "no attempt made"
        retry_after: Optional[str] = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self._delay(attempt - 1, retry_after))
            retry_after = None
            if self._bucket is not None:
                self._bucket.acquire()
            started = time.monotonic()
            try:
                with self._slots:
                    resp = self._client.post(url, json=body)
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("chat request failed (attempt %d): %s", attempt + 1, last_error)
                continue
            latency = time.monotonic() - started

            if resp.status_code in (401, 403):
                raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                retry_after = resp.headers.get("retry-after")
                log.warning("chat request failed (attempt %d): %s", attempt + 1, last_error)
                continue
            if resp.status_code >= 400:
                raise ClientRequestError(f"HTTP {resp.status_code}: {resp.text[:200]}", resp.status_code)
            return self._parse(resp, latency)
        raise BackendUnavailable(f"gave up after {self.max_retries + 1} attempts: {last_error}")

    @staticmethod
    def _parse(resp: httpx.Response, latency: float) -> ChatResponse:
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat completion: {exc!r}") from exc
        if text is None:
            text = ""
        if text == "":
            log.warning("provider returned an empty completion")
        usage = data.get("usage") or {}
        return ChatResponse(
            text,
            Usage(int(usage.get("prompt_tokens", 0) or 0), int(usage.get("completion_tokens", 0) or 0)),
            latency,
        )
