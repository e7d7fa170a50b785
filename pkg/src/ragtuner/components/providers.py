"""Minimal client for OpenAI-compatible HTTP endpoints.

Only the two routes the pipelines need are covered: ``/embeddings`` and
``/chat/completions``. Transient failures (429, 5xx, timeouts, connection
errors) are retried with exponential backoff.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import httpx

from ..errors import ProviderError, ProviderTimeout

log = logging.getLogger(__name__)

BASE_URL_ENV = "RAGTUNER_BASE_URL"
API_KEY_ENV = "RAGTUNER_API_KEY"


@dataclass
class EndpointConfig:
    base_url: str
    api_key: str
    model: str
    timeout: float = 60.0
    batch_size: int = 64
    max_in_flight: int = 4
    max_attempts: int = 3
    backoff: float = 0.5
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False, compare=False)

    @classmethod
    def from_env(cls, model: str, **overrides: Any) -> "EndpointConfig":
        base = overrides.pop("base_url", None) or os.environ.get(BASE_URL_ENV)
        key = overrides.pop("api_key", None) or os.environ.get(API_KEY_ENV)
        if not base:
            raise ProviderError(None, f"{BASE_URL_ENV} is not set")
        if not key:
            raise ProviderError(None, f"{API_KEY_ENV} is not set")
        return cls(base_url=base.rstrip("/"), api_key=key, model=model, **overrides)


def _transient(status: int) -> bool:
    return status == 429 or status >= 500


class ProviderClient:
    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._http = httpx.Client(
            base_url=config.base_url,
            headers={"Authorization": f"Bearer {config.api_key}"},
            timeout=config.timeout,
            transport=transport,
        )

    def close(self) -> None:
        self._http.close()

    def post(self, route: str, payload: dict) -> dict:
        cfg = self.config
        last: Exception | None = None
        for attempt in range(cfg.max_attempts):
            if attempt:
                cfg.sleep(cfg.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post(route, json=payload)
            except httpx.TimeoutException:
                last = ProviderTimeout(f"{route} timed out after {cfg.timeout}s")
                log.warning("attempt %d: %s", attempt + 1, last)
                continue
            except httpx.TransportError as exc:
                last = ProviderError(None, str(exc))
                log.warning("attempt %d: %s", attempt + 1, last)
                continue
            if resp.status_code == 200:
                return resp.json()
            last = ProviderError(resp.status_code, resp.text)
            if not _transient(resp.status_code):
                break
            log.warning("attempt %d: %s", attempt + 1, last)
        raise last
