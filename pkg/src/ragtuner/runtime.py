"""Component registration and the two-phase pipeline executor."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol

from .dem import DemStore
from .dsl import PipelineSpec, TunableRef, validate_against_registry
from .errors import (
    ContractMismatch,
    DomainAccessViolation,
    DuplicateKind,
    RuntimeFailure,
    StageFailure,
    StoreError,
    UnresolvedTunable,
)
from .io import Document, write_jsonl

log = logging.getLogger(__name__)

PHASES = ("index", "query")


@dataclass(frozen=True)
class Contract:
    """Declared shape of a component: its phase and positional domain roles.

    A role name that appears in both ``inputs`` and ``outputs`` must be bound
    to the same domain. Roles in ``indexed_roles`` require a vector-indexed
    domain.
    """

    phase: str
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    indexed_roles: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.phase not in PHASES:
            raise ValueError(f"phase must be one of {PHASES}")


class Component(Protocol):
    def __call__(self, ctx: "StageContext") -> None: ...


Factory = Callable[[dict[str, Any]], Component]


class ComponentRegistry:
    def __init__(self) -> None:
        self._entries: dict[str, tuple[Contract, Factory]] = {}

    def register(self, kind: str, contract: Contract, factory: Factory) -> None:
        if kind in self._entries:
            raise DuplicateKind(kind)
        if not kind:
            raise ValueError("kind must be nonempty")
        self._entries[kind] = (contract, factory)

    def __contains__(self, kind: object) -> bool:
        return kind in self._entries

    def kinds(self) -> list[str]:
        return sorted(self._entries)

    def contract(self, kind: str) -> Contract:
        return self._entries[kind][0]

    def factory(self, kind: str) -> Factory:
        return self._entries[kind][1]

    def copy(self) -> "ComponentRegistry":
        other = ComponentRegistry()
        other._entries = dict(self._entries)
        return other


# -- guarded store view ----------------------------------------------------------


class GuardedStore:
    """Store view limited to one stage's declared domains.

    Reads are allowed on inputs and outputs; writes only on outputs. A link
    may be created when at least one endpoint lives in a writable domain and
    both are readable.
    """

    def __init__(self, store: DemStore, stage: str, readable: Iterable[str], writable: Iterable[str]):
        self._store = store
        self._stage = stage
        self._writable = frozenset(writable)
        self._readable = frozenset(readable) | self._writable

    def _deny(self, what: str) -> DomainAccessViolation:
        return DomainAccessViolation(f"stage {self._stage!r} may not {what}")

    def _read_domain(self, domain: str) -> str:
        if domain not in self._readable:
            raise self._deny(f"read domain {domain!r}")
        return domain

    def _read(self, eid: str):
        el = self._store.get(eid)
        self._read_domain(el.domain)
        return el

    def __contains__(self, eid: object) -> bool:
        return eid in self._store

    def get(self, eid: str):
        return self._read(eid)

    def domain(self, name: str):
        return self._store.domain(self._read_domain(name))

    def elements(self, domain: str) -> list[str]:
        return self._store.elements(self._read_domain(domain))

    def children(self, eid: str) -> list[str]:
        return list(self._read(eid).children)

    def parents(self, eid: str) -> list[str]:
        return list(self._read(eid).parents)

    def hyperedge_members(self, eid: str) -> list[str]:
        return self.children(eid)

    def creation_order(self, eid: str) -> int:
        self._read(eid)
        return self._store.creation_order(eid)

    def index(self, domain: str):
        return self._store.index(self._read_domain(domain))

    def nearest(self, domain: str, query, k: int | None = None):
        return self._store.nearest(self._read_domain(domain), query, k)

    def create_element(self, domain: str, props: dict | None = None, weight: float = 1.0) -> str:
        if domain not in self._writable:
            raise self._deny(f"write domain {domain!r}")
        return self._store.create_element(domain, props, weight)

    def set_embedding(self, eid: str, vector) -> None:
        el = self._store.get(eid)
        if el.domain not in self._writable:
            raise self._deny(f"write domain {el.domain!r}")
        self._store.set_embedding(eid, vector)

    def link(self, parent: str, child: str) -> None:
        p = self._read(parent)
        c = self._read(child)
        if p.domain not in self._writable and c.domain not in self._writable:
            raise self._deny(f"link {parent}->{child} between read-only domains")
        self._store.link(parent, child)


@dataclass
class StageContext:
    stage: str
    store: GuardedStore
    roles: dict[str, str]
    bus: dict[str, Any]
    query: dict[str, Any] | None = None

    def domain(self, role: str) -> str:
        return self.roles[role]

    @property
    def corpus(self) -> list[Document]:
        return self.bus.get("corpus", [])

    def count(self, key: str, n: int) -> None:
        stats = self.bus.setdefault("stats", {})
        stats[key] = stats.get(key, 0) + n

    def scalar(self, key: str, value: float) -> None:
        self.bus.setdefault("scalars", {})[key] = float(value)


# -- pipelines -------------------------------------------------------------------


@dataclass
class Stage:
    name: str
    kind: str
    contract: Contract
    component: Component
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    @property
    def roles(self) -> dict[str, str]:
        roles = dict(zip(self.contract.inputs, self.inputs))
        roles.update(zip(self.contract.outputs, self.outputs))
        return roles

    def __str__(self) -> str:
        return self.name


@dataclass
class Pipeline:
    spec: PipelineSpec
    index_stages: list[Stage]
    query_stages: list[Stage]

    @property
    def stages(self) -> list[Stage]:
        return self.index_stages + self.query_stages

    def __str__(self) -> str:
        return "[{} | {}]".format(", ".join(map(str, self.index_stages)), ", ".join(map(str, self.query_stages)))


def build_pipeline(registry: ComponentRegistry, spec: PipelineSpec) -> Pipeline:
    for stage in spec.stages:
        for key, value in stage.params.items():
            if isinstance(value, TunableRef):
                raise UnresolvedTunable(f"{stage.name}.{key} still holds a tunable; apply an assignment first")
    if spec.tunables:
        raise UnresolvedTunable(f"spec declares tunables {spec.tunable_paths}")
    diags = validate_against_registry(spec, registry)
    if diags:
        raise ContractMismatch("; ".join(map(str, diags)))
    index, query = [], []
    for s in spec.stages:
        contract = registry.contract(s.kind)
        try:
            component = registry.factory(s.kind)(dict(s.params))
        except (TypeError, ValueError, KeyError) as exc:
            raise ContractMismatch(f"stage {s.name!r}: invalid params: {exc}") from exc
        stage = Stage(s.name, s.kind, contract, component, s.inputs, s.outputs)
        (index if contract.phase == "index" else query).append(stage)
    return Pipeline(spec, index, query)


# -- results ---------------------------------------------------------------------


@dataclass
class QueryRecord:
    qid: str
    retrieved: list[str]
    answer: str
    timings_ms: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"qid": self.qid, "retrieved": self.retrieved, "answer": self.answer, "timings_ms": self.timings_ms}


@dataclass
class RunResult:
    records: list[QueryRecord]
    store: DemStore | None = None
    index_timings_ms: dict[str, float] = field(default_factory=dict)
    stats: dict[str, int] = field(default_factory=dict)
    scalars: dict[str, float] = field(default_factory=dict)

    def record(self, qid: str) -> QueryRecord:
        for r in self.records:
            if r.qid == qid:
                return r
        raise KeyError(qid)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        write_jsonl(path, (r.to_json() for r in self.records))

    @classmethod
    def read(cls, path: str | Path, store: DemStore | None = None) -> "RunResult":
        records = []
        with open(path, encoding="utf-8") as fp:
            for line in fp:
                if line.strip():
                    rec = json.loads(line)
                    records.append(QueryRecord(str(rec["qid"]), list(rec["retrieved"]), rec.get("answer", ""), rec.get("timings_ms", {})))
        return cls(records, store)


def _ensure_domains(store: DemStore, spec: PipelineSpec) -> None:
    for d in spec.domains:
        if d.name in store.domains:
            have = store.domains[d.name]
            if have.indexed != d.indexed or have.embedding_dim != d.dim:
                raise StoreError(f"store domain {d.name!r} does not match the pipeline declaration")
        else:
            store.create_domain(d.name, d.indexed, d.dim)


def _check_relations(store: DemStore, spec: PipelineSpec) -> None:
    for rel in spec.relations:
        children = store.elements(rel.child)
        if not children:
            continue
        if not any(store.get(p).domain == rel.parent for c in children for p in store.get(c).parents):
            raise RuntimeFailure(f"declared relation {rel.parent} -> {rel.child} was never materialized")


def _invoke(stage: Stage, ctx: StageContext) -> None:
    try:
        stage.component(ctx)
    except DomainAccessViolation:
        raise
    except Exception as exc:
        raise StageFailure(stage.name, exc) from exc


def run_pipeline(
    pipeline: Pipeline,
    corpus: Iterable[Document],
    queries: Iterable[Any],
    store: DemStore | None = None,
    *,
    clock: Callable[[], float] = time.perf_counter,
) -> RunResult:
    """Index ``corpus`` once, then answer each query.

    ``queries`` are objects with ``qid`` and ``question`` attributes. The
    store is frozen between phases. ``clock`` feeds the per-stage timings;
    inject a constant clock for byte-identical results.
    """
    store = DemStore() if store is None else store
    _ensure_domains(store, pipeline.spec)
    bus: dict[str, Any] = {"corpus": list(corpus), "stats": {}, "scalars": {}}

    index_timings = {}
    for stage in pipeline.index_stages:
        view = GuardedStore(store, stage.name, stage.inputs, stage.outputs)
        t0 = clock()
        _invoke(stage, StageContext(stage.name, view, stage.roles, bus))
        index_timings[stage.name] = (clock() - t0) * 1000.0
        log.debug("index stage %s done", stage.name)
    _check_relations(store, pipeline.spec)
    store.freeze()

    records = []
    for q in queries:
        scratch: dict[str, Any] = {"qid": q.qid, "question": q.question, "retrieved": [], "answer": ""}
        timings = {}
        for stage in pipeline.query_stages:
            view = GuardedStore(store, stage.name, stage.inputs, ())
            t0 = clock()
            _invoke(stage, StageContext(stage.name, view, stage.roles, bus, scratch))
            timings[stage.name] = (clock() - t0) * 1000.0
        retrieved = [str(e) for e in scratch["retrieved"]]
        missing = [e for e in retrieved if e not in store]
        if missing:
            raise RuntimeFailure(f"query {q.qid!r} retrieved unknown ids {missing}")
        records.append(QueryRecord(str(q.qid), retrieved, str(scratch["answer"]), timings))

    violations = store.validate()
    if violations:
        raise RuntimeFailure(f"store integrity check failed: {violations[:3]}")
    for key, n in sorted(bus["stats"].items()):
        log.info("%s: %s", key, n)
    return RunResult(records, store, index_timings, dict(bus["stats"]), dict(bus["scalars"]))


def stage_contracts(pipeline: Pipeline) -> Mapping[str, tuple[Contract, tuple[str, ...], tuple[str, ...]]]:
    return {s.name: (s.contract, s.inputs, s.outputs) for s in pipeline.stages}
