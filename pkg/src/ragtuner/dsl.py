"""Declarative JSON pipeline language.

A pipeline file has four top-level keys::

    {
      "name": "vanilla",
      "domains": [
        {"name": "chunks", "indexed": true, "dim": 256},
        {"parent_of": {"parent": "chunks", "child": "entities"}}
      ],
      "stages": [
        {"kind": "chunker", "name": "chunker", "outputs": ["chunks"],
         "params": {"chunk_size": {"$tune": {"kind": "int", "low": 64, "high": 512, "default": 128}}}}
      ],
      "tuner": {"budget": 25}
    }

Any stage parameter may be wrapped in ``{"$tune": {...}}`` to declare it as a
hyper-parameter; its path is ``<stage name>.<param>``. See docs/schema.md.
"""

from __future__ import annotations

import copy
import difflib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Protocol

from .errors import (
    DuplicateTunablePath,
    MissingAssignment,
    OutOfBounds,
    SchemaError,
    SpecError,
    SpecSyntaxError,
)

TUNE_KEY = "$tune"
KINDS = ("float", "int", "categorical")
TUNER_KEYS = {
    "budget": int,
    "epsilon": (int, float),
    "seed": int,
    "n_init": int,
    "patience": int,
    "xi": (int, float),
    "n_candidates": int,
    "n_local": int,
    "local_std": (int, float),
    "strategy": str,
    "objective": dict,
    "corpus": str,
}


@dataclass(frozen=True)
class TunableRef:
    path: str


@dataclass(frozen=True)
class TunableDecl:
    path: str
    kind: str
    default: Any
    low: float | int | None = None
    high: float | int | None = None
    choices: tuple | None = None

    def coerce(self, value: Any) -> Any:
        """Return ``value`` in canonical form, or raise OutOfBounds."""
        if self.kind == "categorical":
            for choice in self.choices:
                if type(choice) is type(value) and choice == value:
                    return choice
            raise OutOfBounds(self.path, value)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise OutOfBounds(self.path, value)
        if self.kind == "int":
            if float(value) != int(value):
                raise OutOfBounds(self.path, value)
            value = int(value)
        else:
            value = float(value)
        if not self.low <= value <= self.high:
            raise OutOfBounds(self.path, value)
        return value

    def to_json(self) -> dict:
        body: dict[str, Any] = {"kind": self.kind, "default": self.default}
        if self.kind == "categorical":
            body["choices"] = list(self.choices)
        else:
            body["low"] = self.low
            body["high"] = self.high
        return {TUNE_KEY: body}


@dataclass(frozen=True)
class DomainDecl:
    name: str
    indexed: bool = False
    dim: int | None = None


@dataclass(frozen=True)
class Relation:
    parent: str
    child: str


@dataclass
class StageSpec:
    kind: str
    name: str
    params: dict[str, Any] = field(default_factory=dict)
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()


@dataclass
class PipelineSpec:
    name: str
    domains: list[DomainDecl]
    stages: list[StageSpec]
    relations: list[Relation] = field(default_factory=list)
    tunables: list[TunableDecl] = field(default_factory=list)
    tuner: dict[str, Any] = field(default_factory=dict)

    def domain(self, name: str) -> DomainDecl:
        for d in self.domains:
            if d.name == name:
                return d
        raise KeyError(name)

    def stage(self, name: str) -> StageSpec:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def tunable(self, path: str) -> TunableDecl:
        for t in self.tunables:
            if t.path == path:
                return t
        raise KeyError(path)

    @property
    def tunable_paths(self) -> list[str]:
        return [t.path for t in self.tunables]

    @property
    def is_concrete(self) -> bool:
        return not self.tunables and not any(
            isinstance(v, TunableRef) for s in self.stages for v in s.params.values()
        )


@dataclass(frozen=True)
class Diagnostic:
    code: str
    pointer: str
    message: str

    def __str__(self) -> str:
        return f"{self.pointer or '/'}: {self.code}: {self.message}"


# -- parsing -------------------------------------------------------------------


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _expect(cond: bool, pointer: str, message: str) -> None:
    if not cond:
        raise SchemaError(pointer, message)


def _ptr(*parts: object) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def _parse_tunable(path: str, body: Any, pointer: str) -> TunableDecl:
    _expect(isinstance(body, dict), pointer, "$tune must be an object")
    kind = body.get("kind")
    _expect(kind in KINDS, _ptr_join(pointer, "kind"), f"kind must be one of {', '.join(KINDS)}")
    allowed = {"kind", "default", "choices"} if kind == "categorical" else {"kind", "default", "low", "high"}
    for key in body:
        _expect(key in allowed, _ptr_join(pointer, key), f"unexpected key for a {kind} tunable")
    _expect("default" in body, _ptr_join(pointer, "default"), "a default value is required")
    default = body["default"]

    if kind == "categorical":
        choices = body.get("choices")
        _expect(isinstance(choices, list), _ptr_join(pointer, "choices"), "choices must be a list")
        _expect(
            all(isinstance(c, (str, int, float, bool)) for c in choices),
            _ptr_join(pointer, "choices"),
            "choices must be scalars",
        )
        distinct = {json.dumps(c) for c in choices}
        _expect(len(choices) >= 2 and len(distinct) == len(choices), _ptr_join(pointer, "choices"), "need at least two distinct choices")
        decl = TunableDecl(path, kind, default, choices=tuple(choices))
    else:
        check = _is_int if kind == "int" else _is_num
        for key in ("low", "high"):
            _expect(key in body and check(body[key]), _ptr_join(pointer, key), f"{key} must be a finite {'integer' if kind == 'int' else 'number'}")
        low, high = body["low"], body["high"]
        _expect(low < high, pointer, "low must be strictly below high")
        if kind == "float":
            low, high = float(low), float(high)
        decl = TunableDecl(path, kind, default, low=low, high=high)
    try:
        decl = replace(decl, default=decl.coerce(default))
    except OutOfBounds:
        raise SchemaError(_ptr_join(pointer, "default"), f"default {default!r} is outside the declared range") from None
    return decl


def _ptr_join(pointer: str, *parts: object) -> str:
    return pointer + _ptr(*parts)


def _contains_tune(value: Any) -> bool:
    if isinstance(value, dict):
        return TUNE_KEY in value or any(_contains_tune(v) for v in value.values())
    if isinstance(value, list):
        return any(_contains_tune(v) for v in value)
    return False


def _domain_list(value: Any, pointer: str) -> tuple[str, ...]:
    _expect(isinstance(value, list) and all(isinstance(v, str) and v for v in value), pointer, "must be a list of domain names")
    return tuple(value)


def spec_from_obj(obj: Any) -> PipelineSpec:
    """Build a PipelineSpec from already-decoded JSON."""
    _expect(isinstance(obj, dict), "", "top level must be an object")
    for key in obj:
        _expect(key in ("name", "domains", "stages", "tuner"), _ptr(key), "unknown top-level key")
    name = obj.get("name")
    _expect(isinstance(name, str) and name, "/name", "name must be a nonempty string")

    domains: list[DomainDecl] = []
    relations: list[Relation] = []
    raw_domains = obj.get("domains")
    _expect(isinstance(raw_domains, list), "/domains", "domains must be a list")
    relation_ptrs = []
    for i, entry in enumerate(raw_domains):
        p = _ptr("domains", i)
        _expect(isinstance(entry, dict), p, "domain entry must be an object")
        if "parent_of" in entry:
            _expect(set(entry) == {"parent_of"}, p, "a relation entry holds only parent_of")
            rel = entry["parent_of"]
            _expect(
                isinstance(rel, dict) and set(rel) == {"parent", "child"} and all(isinstance(v, str) for v in rel.values()),
                p + "/parent_of",
                "parent_of needs string parent and child",
            )
            relations.append(Relation(rel["parent"], rel["child"]))
            relation_ptrs.append(p + "/parent_of")
            continue
        for key in entry:
            _expect(key in ("name", "indexed", "dim"), _ptr("domains", i, key), "unknown domain key")
        dname = entry.get("name")
        _expect(isinstance(dname, str) and dname, p + "/name", "domain name must be a nonempty string")
        _expect(all(d.name != dname for d in domains), p + "/name", f"domain {dname!r} declared twice")
        indexed = entry.get("indexed", False)
        _expect(isinstance(indexed, bool), p + "/indexed", "indexed must be a boolean")
        dim = entry.get("dim")
        _expect(dim is None or (_is_int(dim) and dim > 0), p + "/dim", "dim must be a positive integer")
        _expect(not indexed or dim is not None, p + "/dim", "an indexed domain needs dim")
        domains.append(DomainDecl(dname, indexed, dim))
    declared = {d.name for d in domains}
    for rel, p in zip(relations, relation_ptrs):
        for role in ("parent", "child"):
            _expect(getattr(rel, role) in declared, p + "/" + role, f"undeclared domain {getattr(rel, role)!r}")

    raw_stages = obj.get("stages")
    _expect(isinstance(raw_stages, list) and raw_stages, "/stages", "stages must be a nonempty list")
    stages: list[StageSpec] = []
    tunables: list[TunableDecl] = []
    produced: set[str] = set()
    for i, entry in enumerate(raw_stages):
        p = _ptr("stages", i)
        _expect(isinstance(entry, dict), p, "stage must be an object")
        for key in entry:
            _expect(key in ("kind", "name", "params", "inputs", "outputs"), _ptr("stages", i, key), "unknown stage key")
        kind = entry.get("kind")
        _expect(isinstance(kind, str) and kind, p + "/kind", "kind must be a nonempty string")
        sname = entry.get("name", kind)
        _expect(isinstance(sname, str) and sname and "." not in sname, p + "/name", "stage name must be a nonempty string without dots")
        _expect(all(s.name != sname for s in stages), p + "/name", f"stage name {sname!r} used twice")
        inputs = _domain_list(entry.get("inputs", []), p + "/inputs")
        outputs = _domain_list(entry.get("outputs", []), p + "/outputs")
        for role, names in (("inputs", inputs), ("outputs", outputs)):
            for j, d in enumerate(names):
                _expect(d in declared, _ptr("stages", i, role, j), f"undeclared domain {d!r}")
        for j, d in enumerate(inputs):
            _expect(d in produced, _ptr("stages", i, "inputs", j), f"domain {d!r} is consumed before any earlier stage produces it")
        raw_params = entry.get("params", {})
        _expect(isinstance(raw_params, dict), p + "/params", "params must be an object")
        params: dict[str, Any] = {}
        # sorted so the tunable order survives a round trip through canonical_form
        for key, value in sorted(raw_params.items()):
            pp = _ptr("stages", i, "params", key)
            if isinstance(value, dict) and TUNE_KEY in value:
                _expect(len(value) == 1, pp, "a $tune wrapper must be the only key")
                path = f"{sname}.{key}"
                if any(t.path == path for t in tunables):
                    raise DuplicateTunablePath(pp, f"tunable path {path!r} declared twice")
                tunables.append(_parse_tunable(path, value[TUNE_KEY], pp + "/" + TUNE_KEY.replace("~", "~0")))
                params[key] = TunableRef(path)
            else:
                _expect(not _contains_tune(value), pp, "$tune is only allowed as a direct parameter value")
                params[key] = copy.deepcopy(value)
        produced.update(outputs)
        stages.append(StageSpec(kind, sname, params, inputs, outputs))

    tuner = obj.get("tuner", {})
    _expect(isinstance(tuner, dict), "/tuner", "tuner must be an object")
    for key, value in tuner.items():
        _expect(key in TUNER_KEYS, _ptr("tuner", key), "unknown tuner key")
        ok = isinstance(value, TUNER_KEYS[key]) and not isinstance(value, bool)
        _expect(ok, _ptr("tuner", key), "wrong type")
    return PipelineSpec(name, domains, stages, relations, tunables, copy.deepcopy(tuner))


def parse_spec(text: str | bytes) -> PipelineSpec:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecSyntaxError(exc.lineno, exc.colno, exc.msg) from None
    return spec_from_obj(obj)


def load_spec(path: str | Path) -> PipelineSpec:
    return parse_spec(Path(path).read_text(encoding="utf-8"))


# -- rendering -----------------------------------------------------------------


def spec_to_obj(spec: PipelineSpec) -> dict:
    decls = {t.path: t for t in spec.tunables}
    domains: list[dict] = []
    for d in spec.domains:
        rec: dict[str, Any] = {"name": d.name, "indexed": d.indexed}
        if d.dim is not None:
            rec["dim"] = d.dim
        domains.append(rec)
    domains += [{"parent_of": {"parent": r.parent, "child": r.child}} for r in spec.relations]
    stages = []
    for s in spec.stages:
        params = {}
        for key, value in s.params.items():
            params[key] = decls[value.path].to_json() if isinstance(value, TunableRef) else copy.deepcopy(value)
        stages.append({"kind": s.kind, "name": s.name, "params": params, "inputs": list(s.inputs), "outputs": list(s.outputs)})
    return {"name": spec.name, "domains": domains, "stages": stages, "tuner": copy.deepcopy(spec.tuner)}


def canonical_form(spec: PipelineSpec) -> str:
    """Deterministic rendering: sorted keys, two-space indent, trailing newline."""
    return json.dumps(spec_to_obj(spec), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# -- assignments ---------------------------------------------------------------


def defaults(spec: PipelineSpec) -> dict[str, Any]:
    return {t.path: t.default for t in spec.tunables}


def apply_assignment(spec: PipelineSpec, assignment: Mapping[str, Any]) -> PipelineSpec:
    """Return a concrete copy of ``spec`` with every tunable replaced by its assigned value."""
    values = {}
    for decl in spec.tunables:
        if decl.path not in assignment:
            raise MissingAssignment(decl.path)
        values[decl.path] = decl.coerce(assignment[decl.path])
    extra = set(assignment) - set(values)
    if extra:
        raise SpecError(f"assignment names unknown tunables: {sorted(extra)}")
    stages = []
    for s in spec.stages:
        params = {
            k: values[v.path] if isinstance(v, TunableRef) else copy.deepcopy(v)
            for k, v in s.params.items()
        }
        stages.append(StageSpec(s.kind, s.name, params, s.inputs, s.outputs))
    return PipelineSpec(spec.name, list(spec.domains), stages, list(spec.relations), [], copy.deepcopy(spec.tuner))


def concretize(spec: PipelineSpec) -> PipelineSpec:
    """Substitute declared defaults for every tunable."""
    return apply_assignment(spec, defaults(spec))


# -- registry check ------------------------------------------------------------


class _Registry(Protocol):
    def kinds(self) -> list[str]: ...

    def contract(self, kind: str): ...


def validate_against_registry(spec: PipelineSpec, registry: _Registry) -> list[Diagnostic]:
    """Check every stage against its registered contract; never raises."""
    out: list[Diagnostic] = []
    known = registry.kinds()
    for i, stage in enumerate(spec.stages):
        p = _ptr("stages", i)
        if stage.kind not in known:
            near = difflib.get_close_matches(stage.kind, known, n=1)
            hint = f"; did you mean {near[0]!r}?" if near else ""
            out.append(Diagnostic("UnknownComponent", p + "/kind", f"no component registered as {stage.kind!r}{hint}"))
            continue
        contract = registry.contract(stage.kind)
        for role, names, want in (("inputs", stage.inputs, contract.inputs), ("outputs", stage.outputs, contract.outputs)):
            if len(names) != len(want):
                out.append(
                    Diagnostic(
                        "ContractMismatch",
                        p + "/" + role,
                        f"{stage.kind} takes {len(want)} {role} ({', '.join(want) or 'none'}), got {len(names)}",
                    )
                )
        if len(stage.inputs) != len(contract.inputs) or len(stage.outputs) != len(contract.outputs):
            continue
        bound: dict[str, str] = {}
        for names, roles, role_kind in ((stage.inputs, contract.inputs, "inputs"), (stage.outputs, contract.outputs, "outputs")):
            for j, (dname, role) in enumerate(zip(names, roles)):
                if bound.setdefault(role, dname) != dname:
                    out.append(
                        Diagnostic("ContractMismatch", _ptr("stages", i, role_kind, j), f"role {role!r} must be bound to {bound[role]!r}")
                    )
                if role in contract.indexed_roles and not spec.domain(dname).indexed:
                    out.append(
                        Diagnostic("ContractMismatch", _ptr("stages", i, role_kind, j), f"role {role!r} needs an indexed domain, {dname!r} is not")
                    )
    return out
