"""Built-in components and their registration."""

from __future__ import annotations

import logging
from typing import Any

from ..runtime import ComponentRegistry, Contract, StageContext
from .embedding import make_embedder
from .generation import generate_remote, generate_stub
from .graph import PprParams, build_synonym_edges, entity_graph, link_query_entities, ppr, rank_chunks_by_ppr
from .providers import EndpointConfig
from .text import chunk_text, normalize
from .triples import extract_triples_remote, extract_triples_stub, query_entities

log = logging.getLogger(__name__)


def _int(params: dict, key: str, default: int, low: int = 1) -> int:
    value = params.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < low:
        raise ValueError(f"{key} must be an integer >= {low}, got {value!r}")
    return value


def _float(params: dict, key: str, default: float, low: float, high: float) -> float:
    value = params.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not low <= value <= high:
        raise ValueError(f"{key} must be a number in [{low}, {high}], got {value!r}")
    return float(value)


def _known(params: dict, *keys: str) -> None:
    extra = set(params) - set(keys)
    if extra:
        raise ValueError(f"unknown parameters {sorted(extra)}")


_PROVIDER_KEYS = ("provider", "model", "timeout", "batch_size", "max_in_flight")


class Chunker:
    contract = Contract("index", outputs=("chunks",))

    def __init__(self, params: dict[str, Any]):
        _known(params, "chunk_size", "overlap_ratio")
        self.chunk_size = _int(params, "chunk_size", 256)
        self.overlap_ratio = _float(params, "overlap_ratio", 0.0, 0.0, 1.0)
        if self.overlap_ratio >= 1.0:
            raise ValueError("overlap_ratio must be below 1")

    def __call__(self, ctx: StageContext) -> None:
        domain = ctx.domain("chunks")
        n = 0
        for doc in ctx.corpus:
            for i, span in enumerate(chunk_text(doc.text, self.chunk_size, self.overlap_ratio)):
                ctx.store.create_element(
                    domain,
                    {"text": span.text, "doc_id": doc.doc_id, "chunk_index": i, "start_token": span.start, "end_token": span.end},
                )
                n += 1
        ctx.count("chunks", n)


class Embedder:
    """Embeds the ``text`` (or ``surface``) property of every element in its domain."""

    contract = Contract("index", inputs=("target",), outputs=("target",), indexed_roles=frozenset({"target"}))

    def __init__(self, params: dict[str, Any]):
        _known(params, *_PROVIDER_KEYS)
        self.params = params

    def __call__(self, ctx: StageContext) -> None:
        domain = ctx.domain("target")
        embed = make_embedder(self.params, ctx.store.domain(domain).embedding_dim)
        ids, texts = [], []
        for eid in ctx.store.elements(domain):
            props = ctx.store.get(eid).props
            text = props.get("text", props.get("surface"))
            if isinstance(text, str):
                ids.append(eid)
                texts.append(text)
        for eid, vec in zip(ids, embed(texts)):
            ctx.store.set_embedding(eid, vec)
        ctx.count(f"embedded_{domain}", len(ids))


class TripleExtractor:
    """Turns ``(A; R; B)`` facts in chunks into entity vertices and triple edges.

    Entities are deduplicated by normalized surface and embedded on creation;
    every chunk mentioning an entity becomes one of its parents.
    """

    contract = Contract("index", inputs=("chunks",), outputs=("entities", "triples"), indexed_roles=frozenset({"entities"}))

    def __init__(self, params: dict[str, Any]):
        _known(params, "extractor", "extractor_model", *_PROVIDER_KEYS)
        self.extractor = params.get("extractor", "stub")
        if self.extractor not in ("stub", "remote"):
            raise ValueError(f"unknown extractor {self.extractor!r}")
        self.params = {k: v for k, v in params.items() if k in _PROVIDER_KEYS}
        self.extractor_model = params.get("extractor_model", "chat")

    def _extract(self, text: str):
        if self.extractor == "stub":
            return extract_triples_stub(text)
        return extract_triples_remote(text, EndpointConfig.from_env(self.extractor_model))

    def __call__(self, ctx: StageContext) -> None:
        chunks, entities, triples = ctx.domain("chunks"), ctx.domain("entities"), ctx.domain("triples")
        by_norm: dict[str, str] = {}
        seen: set[tuple[str, str, str]] = set()

        def entity(surface: str) -> str:
            key = normalize(surface)
            if key not in by_norm:
                by_norm[key] = ctx.store.create_element(entities, {"surface": surface, "normalized": key})
            return by_norm[key]

        for cid in ctx.store.elements(chunks):
            text = ctx.store.get(cid).props.get("text", "")
            for subj, rel, obj in self._extract(text):
                s, o = entity(subj), entity(obj)
                ctx.store.link(cid, s)
                ctx.store.link(cid, o)
                key = (s, normalize(rel), o)
                if s == o or key in seen:
                    continue
                seen.add(key)
                edge = ctx.store.create_element(triples, {"relation": rel, "source_chunk": cid})
                ctx.store.link(edge, s)
                ctx.store.link(edge, o)

        ids = list(by_norm.values())
        embed = make_embedder(self.params, ctx.store.domain(entities).embedding_dim)
        for eid, vec in zip(ids, embed([ctx.store.get(e).props["surface"] for e in ids])):
            ctx.store.set_embedding(eid, vec)
        ctx.count("entities", len(ids))
        ctx.count("triples", len(seen))


class SynonymLinker:
    contract = Contract("index", inputs=("entities",), outputs=("synonyms",), indexed_roles=frozenset({"entities"}))

    def __init__(self, params: dict[str, Any]):
        _known(params, "synonym_threshold")
        self.threshold = _float(params, "synonym_threshold", 0.8, 0.0, 1.0)

    def __call__(self, ctx: StageContext) -> None:
        n = build_synonym_edges(ctx.store, ctx.domain("entities"), ctx.domain("synonyms"), self.threshold)
        ctx.count("synonym_edges", n)
        log.info("synonym edges created: %d (threshold %.3f)", n, self.threshold)


class VectorRetriever:
    """Query-time nearest-neighbour lookup.

    In ``passages`` mode the question embedding retrieves ``top_k`` elements.
    In ``entities`` mode the entity surfaces spotted in the question are
    embedded and left on the query scratch for graph retrieval.
    """

    contract = Contract("query", inputs=("target",), indexed_roles=frozenset({"target"}))

    def __init__(self, params: dict[str, Any]):
        _known(params, "top_k", "mode", *_PROVIDER_KEYS)
        self.top_k = _int(params, "top_k", 5)
        self.mode = params.get("mode", "passages")
        if self.mode not in ("passages", "entities"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self.params = {k: v for k, v in params.items() if k in _PROVIDER_KEYS}
        self._embed = None

    def __call__(self, ctx: StageContext) -> None:
        domain = ctx.domain("target")
        if self._embed is None:
            self._embed = make_embedder(self.params, ctx.store.domain(domain).embedding_dim)
        q = ctx.query
        if self.mode == "passages":
            (vec,) = self._embed([q["question"]])
            q["retrieved"] = [eid for eid, _ in ctx.store.nearest(domain, vec, self.top_k)]
        else:
            surfaces = query_entities(q["question"])
            vectors = self._embed(surfaces) if surfaces else []
            q["query_entities"] = surfaces
            q["query_entity_vectors"] = vectors
            q["entity_hits"] = [ctx.store.nearest(domain, v, 1)[:1] for v in vectors]


class PprRetriever:
    """Seeds PageRank from linked query entities and ranks chunks by entity mass.

    Falls back to plain chunk retrieval when no query entity clears the link
    threshold.
    """

    contract = Contract(
        "query",
        inputs=("entities", "triples", "synonyms", "chunks"),
        indexed_roles=frozenset({"entities", "chunks"}),
    )

    def __init__(self, params: dict[str, Any]):
        _known(params, "damping", "link_threshold", "top_k", "tolerance", "max_iterations", *_PROVIDER_KEYS)
        self.ppr_params = PprParams(
            damping=_float(params, "damping", 0.5, 0.0, 1.0),
            tolerance=_float(params, "tolerance", 1e-8, 0.0, 1.0),
            max_iterations=_int(params, "max_iterations", 100),
            link_threshold=_float(params, "link_threshold", 0.8, 0.0, 1.0),
        )
        self.top_k = _int(params, "top_k", 5)
        self.params = {k: v for k, v in params.items() if k in _PROVIDER_KEYS}
        self._embed = None

    def __call__(self, ctx: StageContext) -> None:
        entities, chunks = ctx.domain("entities"), ctx.domain("chunks")
        q = ctx.query
        seeds = link_query_entities(ctx.store, q.get("query_entity_vectors", []), self.ppr_params.link_threshold, entities)
        ranked: list[str] = []
        if seeds:
            key = ("ppr_graph", ctx.stage)
            if key not in ctx.bus:
                ctx.bus[key] = entity_graph(ctx.store, entities, (ctx.domain("triples"), ctx.domain("synonyms")))
            scores = ppr(ctx.bus[key], seeds, self.ppr_params)
            ranked = rank_chunks_by_ppr(ctx.store, scores, chunks)[: self.top_k]
        if not ranked:
            if self._embed is None:
                self._embed = make_embedder(self.params, ctx.store.domain(chunks).embedding_dim)
            (vec,) = self._embed([q["question"]])
            ranked = [eid for eid, _ in ctx.store.nearest(chunks, vec, self.top_k)]
            q["fallback"] = True
        q["seeds"] = seeds
        q["retrieved"] = ranked


class Generator:
    contract = Contract("query", inputs=("contexts",))

    def __init__(self, params: dict[str, Any]):
        _known(params, "provider", "model", "timeout", "max_contexts")
        self.provider = params.get("provider", "stub")
        if self.provider not in ("stub", "remote"):
            raise ValueError(f"unknown generation provider {self.provider!r}")
        self.model = params.get("model", "chat")
        self.timeout = params.get("timeout", 60.0)
        self.max_contexts = _int(params, "max_contexts", 5)

    def __call__(self, ctx: StageContext) -> None:
        domain = ctx.domain("contexts")
        q = ctx.query
        texts = []
        for eid in q["retrieved"]:
            el = ctx.store.get(eid)
            if el.domain == domain and isinstance(el.props.get("text"), str):
                texts.append(el.props["text"])
        texts = texts[: self.max_contexts]
        if self.provider == "stub":
            q["answer"] = generate_stub(q["question"], texts)
        else:
            q["answer"] = generate_remote(q["question"], texts, EndpointConfig.from_env(self.model, timeout=self.timeout))


BUILTINS = {
    "chunker": Chunker,
    "embedder": Embedder,
    "triple_extractor": TripleExtractor,
    "synonym_linker": SynonymLinker,
    "vector_retriever": VectorRetriever,
    "ppr_retriever": PprRetriever,
    "generator": Generator,
}
BUILTIN_KINDS = frozenset(BUILTINS)


def register_builtins(registry: ComponentRegistry) -> ComponentRegistry:
    for kind, cls in BUILTINS.items():
        registry.register(kind, cls.contract, cls)
    return registry


def builtin_registry() -> ComponentRegistry:
    return register_builtins(ComponentRegistry())
