"""Triple extraction and query-side entity spotting."""

from __future__ import annotations

import re

import httpx

from .generation import chat
from .providers import EndpointConfig

TRIPLE = re.compile(r"\(\s*([^;()]+?)\s*;\s*([^;()]+?)\s*;\s*([^;()]+?)\s*\)")
_CAP_RUN = re.compile(r"\b[A-Z][\w'-]*(?:\s+[A-Z][\w'-]*)*")
# sentence-initial words that are capitalized but are not entities
_NOT_ENTITIES = {
    "A", "An", "The", "What", "Which", "Who", "Whom", "Whose", "Where", "When", "Why", "How",
    "Is", "Are", "Was", "Were", "Did", "Does", "Do", "In", "On", "Of", "For", "To",
}

EXTRACT_PROMPT = (
    "Extract factual (subject; relation; object) triples from the passage. "
    "Write one triple per line exactly as (subject; relation; object) and nothing else.\n\nPassage:\n"
)


def extract_triples_stub(text: str) -> list[tuple[str, str, str]]:
    """Read back every literal ``(A; R; B)`` pattern in textual order."""
    return [(m.group(1), m.group(2), m.group(3)) for m in TRIPLE.finditer(text)]


def extract_triples_remote(
    text: str, config: EndpointConfig, transport: httpx.BaseTransport | None = None
) -> list[tuple[str, str, str]]:
    reply = chat([{"role": "user", "content": EXTRACT_PROMPT + text}], config, transport)
    return extract_triples_stub(reply)


def query_entities(question: str) -> list[str]:
    """Candidate entity surfaces in a question.

    Triple patterns win when present; otherwise each run of capitalized
    tokens is a candidate, minus common sentence-initial words.
    """
    triples = extract_triples_stub(question)
    if triples:
        out = []
        for s, _, o in triples:
            for surface in (s, o):
                if surface not in out:
                    out.append(surface)
        return out
    out = []
    for m in _CAP_RUN.finditer(question):
        words = m.group(0).split()
        while words and words[0] in _NOT_ENTITIES:
            words.pop(0)
        surface = " ".join(words)
        if surface and surface not in out:
            out.append(surface)
    return out
