"""Tokenization, sliding-window chunking and sentence splitting."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

_PUNCT = re.compile(r"[^\w\s]")
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, replace punctuation with spaces, split on whitespace."""
    return _PUNCT.sub(" ", text.lower()).split()


def normalize(text: str) -> str:
    return " ".join(normalize_tokens(text))


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_END.split(text) if s.strip()]


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    text: str


def window_starts(n_tokens: int, chunk_size: int, overlap_ratio: float) -> list[int]:
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    if not 0.0 <= overlap_ratio < 1.0:
        raise ValueError("overlap_ratio must lie in [0, 1)")
    # the epsilon absorbs float error such as 10 * (1 - 0.7) = 2.9999999999999996
    stride = max(1, math.floor(chunk_size * (1.0 - overlap_ratio) + 1e-9))
    starts = []
    start = 0
    while start < n_tokens:
        starts.append(start)
        if start + chunk_size >= n_tokens:
            break
        start += stride
    return starts


def chunk_text(text: str, chunk_size: int, overlap_ratio: float = 0.0) -> list[Span]:
    """Split ``text`` into overlapping windows of whitespace tokens.

    Windows advance by ``max(1, floor(chunk_size * (1 - overlap_ratio)))``
    tokens and stop at the first window that reaches the end of the text.
    """
    tokens = text.split()
    spans = []
    for start in window_starts(len(tokens), chunk_size, overlap_ratio):
        end = min(start + chunk_size, len(tokens))
        spans.append(Span(start, end, " ".join(tokens[start:end])))
    return spans
