"""Graph retrieval over the entity/triple/synonym structure in the store.

Entities are vertices. Every triple or synonym element contributes an
undirected edge between its two children, so the walk matrix is built from
symmetric adjacency lists. Scores are computed with Personalized PageRank and
then pushed up to the chunks that mention each entity.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from ..errors import EmptySeeds


@dataclass(frozen=True)
class PprParams:
    damping: float = 0.5
    tolerance: float = 1e-8
    max_iterations: int = 100
    link_threshold: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError("damping must lie in [0, 1]")
        if not 0.0 <= self.link_threshold <= 1.0:
            raise ValueError("link_threshold must lie in [0, 1]")
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("tolerance must be positive and max_iterations at least 1")


def ppr(adjacency: Mapping[str, Sequence[str]], seeds: Mapping[str, float], params: PprParams) -> dict[str, float]:
    """Personalized PageRank by power iteration.

    ``adjacency`` maps each vertex to its out-neighbours (repeat a neighbour
    for a heavier edge). Iterates ``s <- d*M*s + (1-d)*p`` from ``s = p``
    with ``M`` column-stochastic; mass sitting on vertices without
    out-edges is sent back to ``p``. Stops when the L1 change drops below
    the tolerance or the iteration budget runs out.
    """
    if not seeds:
        raise EmptySeeds("personalization needs at least one seed")
    total = sum(seeds.values())
    if abs(total - 1.0) > 1e-9 or any(m < 0 for m in seeds.values()):
        raise ValueError(f"seed masses must be nonnegative and sum to 1, got {total}")

    nodes = list(adjacency)
    pos = {n: i for i, n in enumerate(nodes)}
    for targets in adjacency.values():
        for t in targets:
            if t not in pos:
                pos[t] = len(nodes)
                nodes.append(t)
    for s in seeds:
        if s not in pos:
            raise ValueError(f"seed {s!r} is not a vertex")
    n = len(nodes)

    rows, cols = [], []
    for src, targets in adjacency.items():
        for t in targets:
            rows.append(pos[t])
            cols.append(pos[src])
    outdeg = np.bincount(np.asarray(cols, dtype=np.int64), minlength=n).astype(np.float64)
    data = np.ones(len(rows)) / outdeg[cols] if rows else np.zeros(0)
    walk = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    dangling = outdeg == 0

    p = np.zeros(n)
    for s, m in seeds.items():
        p[pos[s]] = m
    d = params.damping
    score = p.copy()
    for _ in range(params.max_iterations):
        nxt = d * (walk @ score + score[dangling].sum() * p) + (1.0 - d) * p
        delta = np.abs(nxt - score).sum()
        score = nxt
        if delta < params.tolerance:
            break
    return {node: float(score[i]) for i, node in enumerate(nodes)}


def entity_graph(store, entities: str, edge_domains: Iterable[str]) -> dict[str, list[str]]:
    """Symmetric adjacency over ``entities`` from edge elements in ``edge_domains``.

    Hyperedges with more than two entity members expand to cliques.
    """
    adj: dict[str, list[str]] = {eid: [] for eid in store.elements(entities)}
    for domain in edge_domains:
        for edge in store.elements(domain):
            members = [m for m in store.hyperedge_members(edge) if m in adj]
            for i, a in enumerate(members):
                for b in members[i + 1 :]:
                    adj[a].append(b)
                    adj[b].append(a)
    return adj


def similarity_matrix(store, entities: str) -> tuple[list[str], np.ndarray]:
    """Pairwise cosine similarities among the embedded elements of a domain."""
    store.index(entities)
    ids = [eid for eid in store.elements(entities) if store.get(eid).embedding is not None]
    if not ids:
        return ids, np.zeros((0, 0))
    x = np.vstack([store.get(eid).embedding for eid in ids])
    norms = np.linalg.norm(x, axis=1)
    x = np.divide(x, norms[:, None], out=np.zeros_like(x), where=norms[:, None] > 0)
    return ids, np.clip(x @ x.T, -1.0, 1.0)


def build_synonym_edges(
    store,
    entities: str,
    synonyms: str,
    threshold: float,
    similarities: tuple[list[str], np.ndarray] | None = None,
) -> int:
    """Create one synonym element per entity pair whose cosine clears ``threshold``.

    Pairs whose normalized surfaces are equal are skipped. Pairs are visited
    in creation order. Returns the number of edges created.
    """
    ids, sims = similarities if similarities is not None else similarity_matrix(store, entities)
    norm = [store.get(eid).props.get("normalized") for eid in ids]
    created = 0
    for i, j in zip(*np.nonzero(np.triu(sims >= threshold, k=1))):
        if norm[i] is not None and norm[i] == norm[j]:
            continue
        edge = store.create_element(synonyms, {"similarity": float(sims[i, j])})
        store.link(edge, ids[i])
        store.link(edge, ids[j])
        created += 1
    return created


def link_query_entities(store, vectors: Iterable[np.ndarray], threshold: float, entities: str = "entities") -> dict[str, float]:
    """Seed distribution from query entity vectors.

    Each vector adds mass (its cosine times the entity weight) to its single
    nearest stored entity when the cosine clears ``threshold``. Masses are
    normalized to sum to 1; the map is empty when nothing qualifies.
    """
    mass: dict[str, float] = defaultdict(float)
    for v in vectors:
        hits = store.nearest(entities, v, 1)
        if hits and hits[0][1] >= threshold:
            eid, sim = hits[0]
            mass[eid] += sim * store.get(eid).weight
    total = sum(mass.values())
    if total <= 0:
        return {}
    return {eid: m / total for eid, m in mass.items()}


def rank_chunks_by_ppr(store, entity_scores: Mapping[str, float], chunks: str = "chunks") -> list[str]:
    """Rank chunks by the summed scores of the entities they contain."""
    agg: dict[str, float] = defaultdict(float)
    for eid, score in entity_scores.items():
        if score <= 0:
            continue
        for parent in store.parents(eid):
            if store.get(parent).domain == chunks:
                agg[parent] += score
    ranked = [c for c, s in agg.items() if s > 0]
    ranked.sort(key=lambda c: (-agg[c], store.creation_order(c)))
    return ranked
