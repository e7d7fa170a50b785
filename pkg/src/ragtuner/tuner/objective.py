"""Bind a pipeline file, corpus and dataset into a tunable objective."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from ..dem import DemStore
from ..dsl import PipelineSpec, apply_assignment
from ..errors import IncompatibleTrace
from ..evaluation import MetricReport, ObjectiveConfig, QaExample, score_run
from ..io import Document
from ..runtime import ComponentRegistry, RunResult, build_pipeline, run_pipeline
from .engine import TuneResult, TunerConfig, tune
from .space import SearchSpace
from .trace import TrialRecord, best_record, read_trace


def _zero_clock() -> float:
    return 0.0


@dataclass
class PipelineObjective:
    """Callable mapping an assignment to (objective, metric summary)."""

    spec: PipelineSpec
    registry: ComponentRegistry
    corpus: Sequence[Document]
    dataset: Sequence[QaExample]
    objective: ObjectiveConfig
    clock: Callable[[], float] = _zero_clock

    def evaluate(self, assignment: dict[str, Any]) -> tuple[RunResult, MetricReport]:
        concrete = apply_assignment(self.spec, assignment)
        pipeline = build_pipeline(self.registry, concrete)
        run = run_pipeline(pipeline, self.corpus, self.dataset, DemStore(), clock=self.clock)
        return run, score_run(run, self.dataset, self.objective)

    def __call__(self, assignment: dict[str, Any]) -> tuple[float, dict[str, Any]]:
        run, report = self.evaluate(assignment)
        summary = report.summary()
        summary.update({f"count_{k}": v for k, v in sorted(run.stats.items())})
        return report.objective, summary


def tune_spec(
    spec: PipelineSpec,
    registry: ComponentRegistry,
    corpus: Sequence[Document],
    dataset: Sequence[QaExample],
    config: TunerConfig | None = None,
    **kwargs: Any,
) -> TuneResult:
    """Tune every declared hyper-parameter of ``spec`` against ``dataset``.

    Keyword arguments are passed through to :func:`ragtuner.tuner.engine.tune`.
    """
    config = config or TunerConfig.from_block(spec.tuner)
    objective = PipelineObjective(spec, registry, corpus, dataset, ObjectiveConfig.from_json(spec.tuner.get("objective")))
    return tune(objective, SearchSpace.from_spec(spec), config, **kwargs)


def select_trial(trace_path: str | Path, spec: PipelineSpec, trial: int | None = None) -> TrialRecord:
    """Pick the best (or the numbered) trial of a trace, checking it fits ``spec``."""
    records = read_trace(trace_path)
    space = SearchSpace.from_spec(spec)
    if trial is None:
        chosen = best_record(records)
        if chosen is None:
            raise IncompatibleTrace("trace holds no successful trial")
    else:
        matches = [r for r in records if r.trial == trial]
        if not matches:
            raise IncompatibleTrace(f"trace has no trial {trial}")
        chosen = matches[0]
    if set(chosen.assignment) != set(space.paths):
        raise IncompatibleTrace(f"trace tunes {sorted(chosen.assignment)}, pipeline declares {sorted(space.paths)}")
    try:
        space.validate(chosen.assignment)
    except Exception as exc:
        raise IncompatibleTrace(f"trial {chosen.trial} does not fit the declared ranges: {exc}") from None
    return chosen
