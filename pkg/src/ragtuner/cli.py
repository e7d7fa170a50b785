"""``ragtuner`` command line.

Exit codes: 0 success, 1 domain error, 2 usage error (bad flags, missing or
unreadable input files). Progress goes to stderr; artifacts go to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .components import builtin_registry
from .dem import DemStore
from .dsl import PipelineSpec, apply_assignment, canonical_form, concretize, load_spec, validate_against_registry
from .errors import RagTunerError, SchemaError, SpecSyntaxError
from .evaluation import ObjectiveConfig, load_dataset, score_run
from .io import atomic_write, load_corpus, write_json
from .runtime import RunResult, build_pipeline, run_pipeline
from .tuner import TunerConfig, read_trace, select_trial, tune_spec
from .tuner.objective import PipelineObjective
from .tuner.trace import best_record

log = logging.getLogger("ragtuner")


class UsageError(Exception):
    pass


def _readable(path: str | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    try:
        if p.is_file():
            p.open("rb").close()
        else:
            next(iter(p.iterdir()), None)
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from None
    return p


def _load_spec(path: str) -> PipelineSpec:
    return load_spec(_readable(path, "pipeline file"))


def _corpus(args, spec: PipelineSpec):
    path = args.corpus
    if path is None and "corpus" in spec.tuner:
        path = str(Path(args.config).parent / spec.tuner["corpus"])
    return load_corpus(_readable(path, "corpus (--corpus or tuner.corpus)"))


def _objective(spec: PipelineSpec, k: int | None) -> ObjectiveConfig:
    cfg = ObjectiveConfig.from_json(spec.tuner.get("objective"))
    if k is not None:
        cfg = ObjectiveConfig(k, cfg.recall_weight, cfg.f1_weight, cfg.extra)
    return cfg


def _concrete(spec: PipelineSpec) -> PipelineSpec:
    if spec.tunables:
        print(f"note: substituting declared defaults for {len(spec.tunables)} tunable(s)", file=sys.stderr)
        return concretize(spec)
    return spec


def _print_report(report) -> None:
    print(f"R@{report.k}\t{report.mean_recall:.4f}")
    print(f"F1\t{report.mean_f1:.4f}")
    print(f"objective\t{report.objective:.6f}")


# -- subcommands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    path = _readable(args.config, "pipeline file")
    try:
        spec = load_spec(path)
    except SpecSyntaxError as exc:
        print(f"{path}:{exc.line}:{exc.col}: SyntaxError: {exc}")
        return 1
    except SchemaError as exc:
        print(f"{exc.pointer or '/'}: {type(exc).__name__}: {exc.message}")
        return 1
    diags = validate_against_registry(spec, builtin_registry())
    for d in diags:
        print(d)
    return 1 if diags else 0


def cmd_run(args) -> int:
    spec = _concrete(_load_spec(args.config))
    corpus = _corpus(args, spec)
    dataset = load_dataset(_readable(args.data, "dataset"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.getLogger().addHandler(handler)
    try:
        pipeline = build_pipeline(builtin_registry(), spec)
        log.info("pipeline %s: %s", spec.name, pipeline)
        store = DemStore()
        run = run_pipeline(pipeline, corpus, dataset, store)
        report = score_run(run, dataset, _objective(spec, args.k))
        for key, n in sorted(run.stats.items()):
            log.info("count %s = %d", key, n)
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
    run.write(out / "run.jsonl")
    store.save(out / "store.jsonl")
    body = report.to_json()
    body["stats"] = run.stats
    body["pipeline"] = spec.name
    write_json(out / "report.json", body)
    _print_report(report)
    return 0


def cmd_eval(args) -> int:
    run_dir = _readable(args.run, "run directory")
    store_path = run_dir / "store.jsonl"
    store = DemStore.open(store_path) if store_path.exists() else None
    run = RunResult.read(_readable(str(run_dir / "run.jsonl"), "run records"), store)
    dataset = load_dataset(_readable(args.data, "dataset"))
    report = score_run(run, dataset, ObjectiveConfig(k=args.k or 5))
    if args.out:
        write_json(args.out, report.to_json())
    _print_report(report)
    return 0


def cmd_tune(args) -> int:
    spec = _load_spec(args.config)
    if not spec.tunables:
        raise UsageError("the pipeline declares no tunables")
    corpus = _corpus(args, spec)
    dataset = load_dataset(_readable(args.data, "dataset"))
    if args.warm_start:
        _readable(args.warm_start, "warm-start trace")
    config = TunerConfig.from_block(
        spec.tuner, budget=args.budget, epsilon=args.epsilon, seed=args.seed, strategy=args.strategy
    )

    def progress(rec, best):
        obj = "failed" if rec.failed else f"{rec.objective:.6f}"
        running = "n/a" if best is None else f"{best.objective:.6f}"
        print(f"trial {rec.trial}\t{rec.phase}\tobjective {obj}\tbest {running}", file=sys.stderr)

    stamp = (lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")) if args.timestamps else None
    result = tune_spec(
        spec,
        builtin_registry(),
        corpus,
        dataset,
        config,
        trace_path=args.trace,
        warm_start=args.warm_start,
        timestamp=stamp,
        progress=progress,
    )
    if result.best is None:
        print("all trials failed", file=sys.stderr)
        return 1
    best_spec = args.best_spec or str(Path(args.trace).with_suffix(".best.json"))
    with atomic_write(best_spec) as fp:
        fp.write(canonical_form(apply_assignment(spec, result.best.assignment)))
    if result.stopped_early:
        print(f"converged after {len(result.trace)} trials", file=sys.stderr)
    print(json.dumps({"trial": result.best.trial, "objective": result.best.objective, "assignment": result.best.assignment}, sort_keys=True))
    return 0


def cmd_replay(args) -> int:
    spec = _load_spec(args.config)
    chosen = select_trial(_readable(args.trace, "trace"), spec, args.trial)
    corpus = _corpus(args, spec)
    dataset = load_dataset(_readable(args.data, "dataset"))
    objective = PipelineObjective(spec, builtin_registry(), corpus, dataset, _objective(spec, None))
    _, report = objective.evaluate(chosen.assignment)
    body = report.to_json()
    body.update({"trial": chosen.trial, "assignment": chosen.assignment, "recorded_objective": chosen.objective})
    if args.out:
        write_json(args.out, body)
    _print_report(report)
    if chosen.objective is not None:
        same = math.isclose(report.objective, chosen.objective, rel_tol=0.0, abs_tol=1e-9)
        print(f"recorded\t{chosen.objective:.6f}\treproduced\t{'yes' if same else 'no'}")
    return 0


def cmd_report(args) -> int:
    records = read_trace(_readable(args.trace, "trace"))
    print("trial\tphase\tobjective\tbest_so_far")
    for i, rec in enumerate(records):
        best = best_record(records[: i + 1])
        obj = "failed" if rec.failed else repr(rec.objective)
        print(f"{rec.trial}\t{rec.phase}\t{obj}\t{'' if best is None else repr(best.objective)}")
    return 0


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragtuner", description="Declarative RAG pipelines with Bayesian hyper-parameter tuning.")
    parser.add_argument("--version", action="version", version=f"ragtuner {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a pipeline file against the component registry")
    p.add_argument("-c", "--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="index a corpus, answer a dataset, and score it")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--corpus")
    p.add_argument("--data", required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("-k", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a previous run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("-k", type=int)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tune", help="Bayesian search over the declared tunables")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--trace", required=True)
    p.add_argument("--warm-start")
    p.add_argument("--best-spec")
    p.add_argument("--strategy", choices=("bayesian", "random"))
    p.add_argument("--timestamps", action="store_true", help="record wall-clock time per trial (breaks byte-identical traces)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("replay", help="re-run the best (or a chosen) trial of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--trial", type=int)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="print the best-so-far curve of a trace as TSV")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.getLogger("ragtuner").setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ragtuner {args.command}: {exc}", file=sys.stderr)
        return 2
    except RagTunerError as exc:
        print(f"ragtuner {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
