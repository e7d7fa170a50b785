"""Domain-Element Model: a store of atomic elements grouped into domains.

Elements carry an id, a weight, a flat property map and ordered parent/child
pointer lists that are always kept in sync. An element with children acts as
an edge (two children) or a hyperedge (more than two). Domains may be
vector-indexed, in which case every embedded element is searchable by cosine
similarity.

The store is the data bus shared by pipeline stages: each run owns one.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Protocol

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateDomain,
    FrozenStore,
    MissingDimension,
    SelfLink,
    SnapshotError,
    StoreError,
    UnindexedDomain,
    UnknownDomain,
    UnknownElement,
)

Scalar = str | int | float | bool | None


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, defined as 0 when either vector has zero norm."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(eq=False)
class Element:
    id: str
    domain: str
    weight: float = 1.0
    props: dict[str, Scalar] = field(default_factory=dict)
    children: list[str] = field(default_factory=list)
    parents: list[str] = field(default_factory=list)
    embedding: np.ndarray | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Element):
            return NotImplemented
        if (self.embedding is None) != (other.embedding is None):
            return False
        if self.embedding is not None and not np.array_equal(self.embedding, other.embedding):
            return False
        return (
            self.id == other.id
            and self.domain == other.domain
            and self.weight == other.weight
            and self.props == other.props
            and self.children == other.children
            and self.parents == other.parents
        )


@dataclass
class Domain:
    name: str
    indexed: bool = False
    embedding_dim: int | None = None
    element_ids: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class Violation:
    rule: str
    element_ids: tuple[str, ...]
    message: str


class VectorIndex(Protocol):
    """What a domain index must provide. Swap in an ANN backend behind this."""

    def upsert(self, eid: str, order: int, vector: np.ndarray) -> None: ...

    def search(self, query: np.ndarray, k: int | None) -> list[tuple[str, float]]: ...

    def ids(self) -> list[str]: ...


class BruteForceIndex:
    """Exact cosine scan over a dense matrix.

    Ties are broken by the creation order passed to :meth:`upsert`.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self._rows: dict[str, int] = {}
        self._ids: list[str] = []
        self._order = np.zeros(16, dtype=np.int64)
        self._mat = np.zeros((16, dim), dtype=np.float64)
        self._norms = np.zeros(16, dtype=np.float64)

    def __len__(self) -> int:
        return len(self._ids)

    def upsert(self, eid: str, order: int, vector: np.ndarray) -> None:
        row = self._rows.get(eid)
        if row is None:
            row = len(self._ids)
            if row == self._mat.shape[0]:
                grow = max(16, row)
                self._mat = np.vstack([self._mat, np.zeros((grow, self.dim))])
                self._norms = np.concatenate([self._norms, np.zeros(grow)])
                self._order = np.concatenate([self._order, np.zeros(grow, dtype=np.int64)])
            self._rows[eid] = row
            self._ids.append(eid)
        self._mat[row] = vector
        self._norms[row] = np.linalg.norm(vector)
        self._order[row] = order

    def similarities(self, query: np.ndarray) -> np.ndarray:
        n = len(self._ids)
        qn = float(np.linalg.norm(query))
        norms = self._norms[:n]
        if qn == 0.0:
            return np.zeros(n)
        denom = norms * qn
        dots = self._mat[:n] @ query
        out = np.zeros(n)
        ok = denom > 0
        out[ok] = dots[ok] / denom[ok]
        return out

    def search(self, query: np.ndarray, k: int | None) -> list[tuple[str, float]]:
        n = len(self._ids)
        if n == 0:
            return []
        sims = self.similarities(query)
        # lexsort: last key is primary
        order = np.lexsort((self._order[:n], -sims))
        if k is not None:
            order = order[:k]
        return [(self._ids[i], float(sims[i])) for i in order]

    def ids(self) -> list[str]:
        return list(self._ids)


def _check_props(props: dict) -> dict[str, Scalar]:
    out = {}
    for key, value in props.items():
        if not isinstance(key, str):
            raise StoreError(f"property keys must be strings, got {key!r}")
        if not (value is None or isinstance(value, (str, int, float, bool))):
            raise StoreError(f"property {key!r} must be a scalar or string, got {type(value).__name__}")
        out[key] = value
    return out


class DemStore:
    def __init__(self) -> None:
        self.domains: dict[str, Domain] = {}
        self._elements: dict[str, Element] = {}
        self._order: dict[str, int] = {}
        self._indexes: dict[str, BruteForceIndex] = {}
        self._counter = 0
        self._frozen = False
        self._write_lock = threading.RLock()

    # -- basic access -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._elements)

    def __contains__(self, eid: object) -> bool:
        return eid in self._elements

    def __iter__(self) -> Iterator[Element]:
        return iter(self._elements.values())

    def get(self, eid: str) -> Element:
        try:
            return self._elements[eid]
        except KeyError:
            raise UnknownElement(eid) from None

    def domain(self, name: str) -> Domain:
        try:
            return self.domains[name]
        except KeyError:
            raise UnknownDomain(name) from None

    def elements(self, domain: str) -> list[str]:
        return list(self.domain(domain).element_ids)

    def creation_order(self, eid: str) -> int:
        self.get(eid)
        return self._order[eid]

    def children(self, eid: str) -> list[str]:
        return list(self.get(eid).children)

    def parents(self, eid: str) -> list[str]:
        return list(self.get(eid).parents)

    def hyperedge_members(self, eid: str) -> list[str]:
        """Members of the edge/hyperedge represented by ``eid`` (its children)."""
        return list(self.get(eid).children)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> None:
        self._frozen = True

    def _writable(self) -> None:
        if self._frozen:
            raise FrozenStore("store is frozen; writes are not allowed in the query phase")

    # -- mutation -----------------------------------------------------------

    def create_domain(self, name: str, indexed: bool = False, embedding_dim: int | None = None) -> str:
        with self._write_lock:
            self._writable()
            if name in self.domains:
                raise DuplicateDomain(name)
            if embedding_dim is not None and (not isinstance(embedding_dim, int) or embedding_dim <= 0):
                raise StoreError(f"embedding_dim must be a positive integer, got {embedding_dim!r}")
            if indexed and embedding_dim is None:
                raise MissingDimension(f"indexed domain {name!r} needs an embedding dimension")
            self.domains[name] = Domain(name, indexed, embedding_dim)
            if indexed:
                self._indexes[name] = BruteForceIndex(embedding_dim)
            return name

    def _new_id(self) -> str:
        while True:
            eid = f"e{self._counter}"
            self._counter += 1
            if eid not in self._elements:
                return eid

    def create_element(self, domain: str, props: dict | None = None, weight: float = 1.0) -> str:
        with self._write_lock:
            self._writable()
            dom = self.domain(domain)
            eid = self._new_id()
            self._add(Element(eid, domain, float(weight), _check_props(props or {})), dom)
            return eid

    def _add(self, element: Element, dom: Domain) -> None:
        self._order[element.id] = len(self._order)
        self._elements[element.id] = element
        dom.element_ids.append(element.id)

    def link(self, parent: str, child: str) -> None:
        """Make ``child`` a child of ``parent``; idempotent."""
        with self._write_lock:
            self._writable()
            p = self.get(parent)
            c = self.get(child)
            if parent == child:
                raise SelfLink(parent)
            if child not in p.children:
                p.children.append(child)
            if parent not in c.parents:
                c.parents.append(parent)

    def set_embedding(self, eid: str, vector: Iterable[float]) -> None:
        with self._write_lock:
            self._writable()
            el = self.get(eid)
            dom = self.domains[el.domain]
            if not dom.indexed:
                raise UnindexedDomain(dom.name)
            v = np.asarray(vector, dtype=np.float64).ravel()
            if v.shape[0] != dom.embedding_dim:
                raise DimensionMismatch(f"expected {dom.embedding_dim} dims, got {v.shape[0]}")
            v.setflags(write=False)
            el.embedding = v
            self._indexes[dom.name].upsert(eid, self._order[eid], v)

    # -- search -------------------------------------------------------------

    def index(self, domain: str) -> BruteForceIndex:
        dom = self.domain(domain)
        if not dom.indexed:
            raise UnindexedDomain(domain)
        return self._indexes[domain]

    def nearest(self, domain: str, query: Iterable[float], k: int | None = None) -> list[tuple[str, float]]:
        """Top-``k`` embedded elements of ``domain`` by cosine similarity.

        ``k=None`` returns every embedded element. Ties go to the element
        created first.
        """
        idx = self.index(domain)
        q = np.asarray(query, dtype=np.float64).ravel()
        if q.shape[0] != idx.dim:
            raise DimensionMismatch(f"expected {idx.dim} dims, got {q.shape[0]}")
        if k is not None and k < 1:
            raise ValueError("k must be positive")
        return idx.search(q, k)

    # -- integrity ----------------------------------------------------------

    def validate(self) -> list[Violation]:
        """Sweep every invariant; an empty list means the store is consistent."""
        out: list[Violation] = []
        listed: dict[str, str] = {}
        for dom in self.domains.values():
            for eid in dom.element_ids:
                if eid not in self._elements:
                    out.append(Violation("UnknownReference", (eid,), f"domain {dom.name!r} lists a missing element"))
                    continue
                if eid in listed:
                    out.append(Violation("DomainMembershipViolation", (eid,), "listed in more than one domain"))
                    continue
                listed[eid] = dom.name
            if dom.indexed and dom.embedding_dim is None:
                out.append(Violation("MissingDimension", (), f"indexed domain {dom.name!r} has no dimension"))

        down: set[tuple[str, str]] = set()
        up: set[tuple[str, str]] = set()
        for el in self._elements.values():
            if listed.get(el.id) != el.domain:
                out.append(
                    Violation(
                        "DomainMembershipViolation",
                        (el.id,),
                        f"element claims domain {el.domain!r} but is listed under {listed.get(el.id)!r}",
                    )
                )
            for name, links in (("children", el.children), ("parents", el.parents)):
                if len(set(links)) != len(links):
                    out.append(Violation("DuplicateLink", (el.id,), f"duplicate entries in {name}"))
                if el.id in links:
                    out.append(Violation("SelfLinkViolation", (el.id,), f"element lists itself in {name}"))
                for other in links:
                    if other not in self._elements:
                        out.append(Violation("UnknownReference", (el.id, other), f"{name} points at a missing element"))
            down.update((el.id, c) for c in el.children)
            up.update((p, el.id) for p in el.parents)
            dom = self.domains.get(el.domain)
            if el.embedding is not None and dom is not None and el.embedding.shape[0] != dom.embedding_dim:
                out.append(Violation("EmbeddingDimensionViolation", (el.id,), "embedding size differs from domain"))

        for parent, child in sorted(down ^ up):
            side = "children" if (parent, child) in down else "parents"
            out.append(
                Violation(
                    "BidirectionalityViolation",
                    (parent, child),
                    f"link {parent}->{child} is only recorded in {side}",
                )
            )

        for name, idx in self._indexes.items():
            embedded = {eid for eid in self.domains[name].element_ids if self._elements[eid].embedding is not None}
            if set(idx.ids()) != embedded:
                out.append(Violation("IndexMismatch", tuple(sorted(set(idx.ids()) ^ embedded)), f"index of {name!r} is stale"))
        return out

    # test hooks: deliberately break invariants so validate() can be exercised

    def _forge_child(self, parent: str, child: str) -> None:
        self.get(parent).children.append(child)

    def _forge_domain(self, eid: str, domain: str) -> None:
        self.get(eid).domain = domain

    # -- persistence --------------------------------------------------------

    def dump(self, fp: IO[str]) -> None:
        """Write a JSONL snapshot: domain headers first, then elements in creation order."""
        for dom in self.domains.values():
            rec = {"kind": "domain", "name": dom.name, "indexed": dom.indexed, "dim": dom.embedding_dim}
            fp.write(json.dumps(rec, sort_keys=True) + "\n")
        for eid in sorted(self._elements, key=self._order.__getitem__):
            el = self._elements[eid]
            rec = {
                "kind": "element",
                "id": el.id,
                "domain": el.domain,
                "weight": el.weight,
                "props": el.props,
                "children": el.children,
                "parents": el.parents,
                "embedding": None if el.embedding is None else el.embedding.tolist(),
            }
            fp.write(json.dumps(rec, sort_keys=True) + "\n")

    def save(self, path: str | Path) -> None:
        from .io import atomic_write

        with atomic_write(path) as fp:
            self.dump(fp)

    @classmethod
    def load(cls, fp: IO[str]) -> "DemStore":
        store = cls()
        records = []
        for lineno, line in enumerate(fp, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SnapshotError(f"line {lineno}: {exc.msg}") from None
            kind = rec.get("kind")
            if kind == "domain":
                store.create_domain(rec["name"], bool(rec.get("indexed")), rec.get("dim"))
            elif kind == "element":
                records.append((lineno, rec))
            else:
                raise SnapshotError(f"line {lineno}: unknown record kind {kind!r}")

        for lineno, rec in records:
            eid = rec["id"]
            if eid in store._elements:
                raise SnapshotError(f"line {lineno}: duplicate element id {eid!r}")
            el = Element(eid, rec["domain"], float(rec.get("weight", 1.0)), _check_props(rec.get("props") or {}))
            store._add(el, store.domain(el.domain))
        for _, rec in records:
            for child in rec.get("children") or []:
                store.link(rec["id"], child)
        for lineno, rec in records:
            stored = rec.get("parents")
            if stored is not None:
                el = store._elements[rec["id"]]
                if sorted(stored) != sorted(el.parents):
                    raise SnapshotError(f"line {lineno}: parents disagree with children pointers")
                el.parents = list(stored)
            if rec.get("embedding") is not None:
                store.set_embedding(rec["id"], rec["embedding"])
        store._counter = len(store._elements)
        return store

    @classmethod
    def open(cls, path: str | Path) -> "DemStore":
        with open(path, encoding="utf-8") as fp:
            return cls.load(fp)


def validate_store(store: DemStore) -> list[Violation]:
    return store.validate()
