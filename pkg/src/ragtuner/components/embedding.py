"""Embedding providers: a deterministic feature-hashing stub and a remote client."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Sequence

import httpx
import numpy as np

from ..errors import ProviderError
from .providers import EndpointConfig, ProviderClient
from .text import normalize_tokens

Embedder = Callable[[Sequence[str]], list[np.ndarray]]


@lru_cache(maxsize=1 << 16)
def _bucket(token: str, dim: int) -> tuple[int, float]:
    raw = token.encode("utf-8")
    idx = int.from_bytes(hashlib.blake2b(raw, digest_size=8, person=b"rt-index").digest(), "little") % dim
    sign = 1.0 if hashlib.blake2b(raw, digest_size=1, person=b"rt-sign").digest()[0] & 1 else -1.0
    return idx, sign


def embed_stub(texts: Sequence[str], dim: int) -> list[np.ndarray]:
    """Signed feature hashing of normalized tokens, L2-normalized.

    Empty or punctuation-only text yields the zero vector.
    """
    if dim < 8:
        raise ValueError("dim must be at least 8")
    out = []
    for text in texts:
        v = np.zeros(dim)
        for tok in normalize_tokens(text):
            idx, sign = _bucket(tok, dim)
            v[idx] += sign
        norm = np.linalg.norm(v)
        out.append(v / norm if norm > 0 else v)
    return out


def embed_remote(
    texts: Sequence[str],
    config: EndpointConfig,
    transport: httpx.BaseTransport | None = None,
) -> list[np.ndarray]:
    """Embed through ``POST {base_url}/embeddings``, preserving input order."""
    texts = list(texts)
    if not texts:
        return []
    client = ProviderClient(config, transport)
    batches = [texts[i : i + config.batch_size] for i in range(0, len(texts), config.batch_size)]

    def one(batch: list[str]) -> list[np.ndarray]:
        body = client.post("/embeddings", {"model": config.model, "input": batch})
        data = body.get("data")
        if not isinstance(data, list) or len(data) != len(batch):
            raise ProviderError(200, f"expected {len(batch)} embeddings, got {body!r}"[:200])
        data = sorted(data, key=lambda d: d.get("index", 0))
        return [np.asarray(d["embedding"], dtype=np.float64) for d in data]

    try:
        if len(batches) == 1:
            results = [one(batches[0])]
        else:
            with ThreadPoolExecutor(max_workers=max(1, config.max_in_flight)) as pool:
                results = list(pool.map(one, batches))
    finally:
        client.close()
    return [v for batch in results for v in batch]


def make_embedder(params: dict, dim: int, transport: httpx.BaseTransport | None = None) -> Embedder:
    """Pick a provider from stage params: ``provider`` is ``stub`` (default) or ``remote``."""
    provider = params.get("provider", "stub")
    if provider == "stub":
        return lambda texts: embed_stub(texts, dim)
    if provider == "remote":
        extra = {k: params[k] for k in ("timeout", "batch_size", "max_in_flight") if k in params}
        config = EndpointConfig.from_env(params.get("model", "text-embedding"), **extra)
        return lambda texts: embed_remote(texts, config, transport)
    raise ValueError(f"unknown embedding provider {provider!r}")
