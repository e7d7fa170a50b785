import json

import pytest

from ragtuner.components import BUILTIN_KINDS, builtin_registry
from ragtuner.dem import DemStore, validate_store
from ragtuner.dsl import apply_assignment, concretize, load_spec, spec_from_obj
from ragtuner.errors import ContractMismatch, DomainAccessViolation, DuplicateKind, StageFailure, UnresolvedTunable
from ragtuner.runtime import ComponentRegistry, Contract, RunResult, build_pipeline, run_pipeline, stage_contracts


def zero_clock():
    return 0.0


@pytest.fixture
def vanilla(fixtures_dir):
    return concretize(load_spec(fixtures_dir / "specs" / "vanilla.json"))


def test_register_and_duplicate():
    reg = ComponentRegistry()
    reg.register("chunker", Contract("index", outputs=("chunks",)), lambda p: None)
    assert "chunker" in reg and reg.kinds() == ["chunker"]
    with pytest.raises(DuplicateKind):
        reg.register("chunker", Contract("index"), lambda p: None)


def test_builtin_kinds():
    assert set(builtin_registry().kinds()) == set(BUILTIN_KINDS) == {
        "chunker",
        "embedder",
        "triple_extractor",
        "synonym_linker",
        "vector_retriever",
        "ppr_retriever",
        "generator",
    }


def test_phase_partition(vanilla, fixtures_dir):
    p = build_pipeline(builtin_registry(), vanilla)
    assert [s.kind for s in p.index_stages] == ["chunker", "embedder"]
    assert [s.kind for s in p.query_stages] == ["vector_retriever", "generator"]
    g = build_pipeline(builtin_registry(), concretize(load_spec(fixtures_dir / "specs" / "graph.json")))
    assert [s.kind for s in g.index_stages] == ["chunker", "embedder", "triple_extractor", "synonym_linker"]
    assert [s.kind for s in g.query_stages] == ["vector_retriever", "ppr_retriever", "generator"]
    assert str(g) == "[chunker, embed_chunks, triple_extractor, synonym_linker | link_entities, ppr, generator]"


def test_unresolved_tunable(fixtures_dir):
    with pytest.raises(UnresolvedTunable):
        build_pipeline(builtin_registry(), load_spec(fixtures_dir / "specs" / "vanilla.json"))


def test_bad_params_are_contract_mismatch(vanilla, fixtures_dir):
    spec = load_spec(fixtures_dir / "specs" / "vanilla.json")
    raw = json.loads((fixtures_dir / "specs" / "vanilla.json").read_text())
    raw["stages"][3]["params"]["temperature"] = 0.3
    with pytest.raises(ContractMismatch):
        build_pipeline(builtin_registry(), concretize(spec_from_obj(raw)))
    assert spec.tunables


def test_empty_query_set_still_indexes(vanilla, tiny_corpus):
    store = DemStore()
    run = run_pipeline(build_pipeline(builtin_registry(), vanilla), tiny_corpus, [], store)
    assert run.records == []
    assert len(store.elements("chunks")) == 3
    assert set(run.index_timings_ms) == {"chunker", "embed_chunks"}


def test_fixture_run(vanilla, tiny_corpus, tiny_dataset):
    store = DemStore()
    run = run_pipeline(build_pipeline(builtin_registry(), vanilla), tiny_corpus, tiny_dataset, store)
    assert [r.qid for r in run.records] == ["q1", "q2"]
    for rec in run.records:
        assert 1 <= len(rec.retrieved) <= 5
        assert all(eid in store for eid in rec.retrieved)
        assert set(rec.timings_ms) == {"retrieve", "generator"}
    assert store.get(run.records[0].retrieved[0]).props["doc_id"] == "b"
    assert "Paris" in run.records[0].answer
    assert validate_store(store) == []
    assert store.frozen


def test_runs_are_byte_identical(vanilla, tiny_corpus, tiny_dataset, tmp_path):
    texts = []
    for i in range(2):
        run = run_pipeline(build_pipeline(builtin_registry(), vanilla), tiny_corpus, tiny_dataset, clock=zero_clock)
        run.write(tmp_path / f"r{i}.jsonl")
        run.store.save(tmp_path / f"s{i}.jsonl")
        texts.append(((tmp_path / f"r{i}.jsonl").read_bytes(), (tmp_path / f"s{i}.jsonl").read_bytes()))
    assert texts[0] == texts[1]
    back = RunResult.read(tmp_path / "r0.jsonl")
    assert back.to_jsonl() == run.to_jsonl()


def test_param_change_is_isolated(fixtures_dir):
    spec = load_spec(fixtures_dir / "specs" / "vanilla.json")
    a = build_pipeline(builtin_registry(), apply_assignment(spec, {"chunker.chunk_size": 64, "chunker.overlap_ratio": 0.0}))
    b = build_pipeline(builtin_registry(), apply_assignment(spec, {"chunker.chunk_size": 300, "chunker.overlap_ratio": 0.4}))
    ca, cb = stage_contracts(a), stage_contracts(b)
    assert ca == cb
    assert [s.component.chunk_size for s in (a.index_stages[0], b.index_stages[0])] == [64, 300]


class _Rogue:
    def __init__(self, params):
        pass

    def __call__(self, ctx):
        ctx.store.create_element("secret", {})


class _Boom:
    def __init__(self, params):
        pass

    def __call__(self, ctx):
        raise ZeroDivisionError("kaput")


def _spec_with(kind):
    return spec_from_obj(
        {
            "name": "t",
            "domains": [{"name": "chunks"}, {"name": "secret"}],
            "stages": [{"kind": kind, "outputs": ["chunks"]}],
        }
    )


def test_undeclared_write_is_denied(tiny_corpus):
    reg = builtin_registry()
    reg.register("rogue", Contract("index", outputs=("chunks",)), _Rogue)
    with pytest.raises(DomainAccessViolation):
        run_pipeline(build_pipeline(reg, _spec_with("rogue")), tiny_corpus, [])


def test_stage_failure_names_the_stage(tiny_corpus):
    reg = builtin_registry()
    reg.register("boom", Contract("index", outputs=("chunks",)), _Boom)
    with pytest.raises(StageFailure) as err:
        run_pipeline(build_pipeline(reg, _spec_with("boom")), tiny_corpus, [])
    assert err.value.stage == "boom"
    assert isinstance(err.value.cause, ZeroDivisionError)


def test_query_phase_cannot_write(vanilla, tiny_corpus, tiny_dataset):
    class Writer:
        def __init__(self, params):
            pass

        def __call__(self, ctx):
            ctx.store.create_element("chunks", {})

    reg = builtin_registry()
    reg.register("writer", Contract("query", inputs=("target",)), Writer)
    raw = {
        "name": "t",
        "domains": [{"name": "chunks"}],
        "stages": [{"kind": "chunker", "outputs": ["chunks"]}, {"kind": "writer", "inputs": ["chunks"]}],
    }
    with pytest.raises(DomainAccessViolation):
        run_pipeline(build_pipeline(reg, spec_from_obj(raw)), tiny_corpus, tiny_dataset)


def test_graph_pipeline_materializes_relation(fixtures_dir):
    from ragtuner.io import load_corpus

    spec = concretize(load_spec(fixtures_dir / "specs" / "graph.json"))
    store = DemStore()
    run = run_pipeline(build_pipeline(builtin_registry(), spec), load_corpus(fixtures_dir / "demo" / "corpus"), [], store)
    assert run.stats["entities"] > 0 and run.stats["synonym_edges"] > 0
    ent = store.elements("entities")[0]
    assert any(store.get(p).domain == "chunks" for p in store.parents(ent))
    edges = store.elements("triples")
    assert all(len(store.hyperedge_members(e)) == 2 for e in edges)
