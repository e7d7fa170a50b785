"""Answer generation: an extractive stub and a chat-completion client."""

from __future__ import annotations

from typing import Sequence

import httpx

from ..errors import ProviderError
from .providers import EndpointConfig, ProviderClient
from .text import normalize_tokens, split_sentences

SYSTEM_PROMPT = (
    "You answer questions using only the numbered context passages provided. "
    "Reply with the shortest phrase that answers the question."
)
NO_CONTEXT = "[no context retrieved]"


def build_prompt(question: str, contexts: Sequence[str]) -> list[dict]:
    if contexts:
        body = "\n".join(f"[{i}] {c}" for i, c in enumerate(contexts, 1))
    else:
        body = NO_CONTEXT
    user = f"Context:\n{body}\n\nQuestion: {question}\nAnswer:"
    return [{"role": "system", "content": SYSTEM_PROMPT}, {"role": "user", "content": user}]


def generate_stub(question: str, contexts: Sequence[str]) -> str:
    """Return the context sentence sharing the most normalized tokens with the question.

    Ties go to the earliest sentence; no contexts gives an empty answer.
    """
    q = set(normalize_tokens(question))
    best, best_overlap = "", -1
    for ctx in contexts:
        for sentence in split_sentences(ctx):
            overlap = len(q.intersection(normalize_tokens(sentence)))
            if overlap > best_overlap:
                best, best_overlap = sentence, overlap
    return best


def chat(messages: list[dict], config: EndpointConfig, transport: httpx.BaseTransport | None = None) -> str:
    client = ProviderClient(config, transport)
    try:
        body = client.post("/chat/completions", {"model": config.model, "messages": messages, "temperature": 0})
    finally:
        client.close()
    try:
        return body["choices"][0]["message"]["content"].strip()
    except (KeyError, IndexError, TypeError, AttributeError):
        raise ProviderError(200, f"malformed completion: {body!r}") from None


def generate_remote(
    question: str,
    contexts: Sequence[str],
    config: EndpointConfig,
    transport: httpx.BaseTransport | None = None,
) -> str:
    return chat(build_prompt(question, contexts), config, transport)
