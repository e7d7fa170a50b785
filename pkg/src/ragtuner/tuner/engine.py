"""The tuning loop: random warm-up, then GP + Expected Improvement."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import qmc

from ..errors import RagTunerError
from .acquisition import expected_improvement_vec
from .gp import gp_fit
from .space import SearchSpace
from .trace import TraceWriter, TrialRecord, best_record, warm_start_load

log = logging.getLogger(__name__)

Objective = Callable[[dict[str, Any]], tuple[float, dict[str, Any]]]


@dataclass(frozen=True)
class TunerConfig:
    budget: int = 25
    epsilon: float = 0.0
    seed: int = 0
    n_init: int | None = None
    patience: int = 5
    xi: float = 0.01
    n_candidates: int = 1024
    n_local: int = 64
    local_std: float = 0.05
    strategy: str = "bayesian"

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.strategy not in ("bayesian", "random"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.patience < 1 or self.epsilon < 0 or self.xi < 0:
            raise ValueError("patience must be positive; epsilon and xi nonnegative")

    @classmethod
    def from_block(cls, block: Mapping[str, Any] | None, **overrides: Any) -> "TunerConfig":
        """Build from a pipeline file's ``tuner`` block; ``None`` overrides are ignored."""
        names = {f.name for f in fields(cls)}
        values = {k: v for k, v in (block or {}).items() if k in names}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def initial_points(self, space: SearchSpace) -> int:
        return self.n_init if self.n_init is not None else max(5, 2 * space.size)


class Suggestion(NamedTuple):
    assignment: dict[str, Any]
    phase: str


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def candidate_points(space: SearchSpace, incumbent: np.ndarray, rng: np.random.Generator, config: TunerConfig) -> np.ndarray:
    with warnings.catch_warnings():
        # Sobol warns on non power-of-two sample sizes; balance is not needed here
        warnings.simplefilter("ignore", UserWarning)
        sobol = qmc.Sobol(space.size, scramble=True, seed=rng).random(config.n_candidates)
    local = np.clip(incumbent + rng.normal(0.0, config.local_std, (config.n_local, space.size)), 0.0, 1.0)
    return space.snap(np.vstack([sobol, local]))


def suggest(
    history: Sequence[TrialRecord],
    space: SearchSpace,
    rng: np.random.Generator,
    config: TunerConfig | None = None,
) -> Suggestion:
    """Next assignment to evaluate, given every trial so far.

    Uniform random until ``n_init`` trials exist (or always, for the random
    strategy); afterwards the argmax of EI over quasi-random candidates plus
    Gaussian perturbations of the incumbent.
    """
    config = config or TunerConfig()
    ok = [r for r in history if not r.failed]
    if config.strategy == "random" or len(history) < config.initial_points(space) or not ok:
        return Suggestion(space.decode(rng.random(space.size)), "random")

    X = np.vstack([space.encode(r.assignment) for r in ok])
    y = np.array([r.objective for r in ok])
    gp = gp_fit(X, y)
    incumbent = X[int(np.argmax(y))]
    cands = candidate_points(space, incumbent, rng, config)
    mu, sd = gp.predict_standardized(cands)
    ei = expected_improvement_vec(mu, sd, gp.standardize(float(y.max())), config.xi)
    return Suggestion(space.decode(cands[int(np.argmax(ei))]), "bayesian")


def converged(history: Sequence[TrialRecord], config: TunerConfig, space: SearchSpace) -> bool:
    """Best objective improved by less than epsilon over the last ``patience`` trials."""
    n = len(history)
    if n < config.initial_points(space) + config.patience:
        return False
    before = best_record(history[: n - config.patience])
    now = best_record(history)
    if before is None or now is None:
        return False
    return now.objective - before.objective < config.epsilon


@dataclass
class TuneResult:
    best: TrialRecord | None
    trace: list[TrialRecord]
    new_trials: int
    stopped_early: bool


def tune(
    objective: Objective,
    space: SearchSpace,
    config: TunerConfig,
    *,
    trace_path: str | Path | None = None,
    warm_start: str | Path | None = None,
    timestamp: Callable[[], str] | None = None,
    progress: Callable[[TrialRecord, TrialRecord | None], None] | None = None,
) -> TuneResult:
    """Run trials until the budget is spent or epsilon-convergence triggers.

    The budget counts warm-start records too. Trials whose objective raises a
    domain error are recorded as failed, kept out of the surrogate, and never
    returned as best.
    """
    if len(space) == 0:
        raise ValueError("nothing to tune: the search space is empty")
    history: list[TrialRecord] = warm_start_load(warm_start, space) if warm_start else []

    writer = None
    if trace_path is not None:
        same = warm_start is not None and Path(warm_start).resolve() == Path(trace_path).resolve()
        writer = TraceWriter(trace_path, append=same)
        if not same:
            for rec in history:
                writer.write(rec)

    next_trial = max((r.trial for r in history), default=-1) + 1
    new, stopped_early = 0, False
    try:
        while len(history) < config.budget:
            seed = trial_seed(config.seed, next_trial)
            rng = np.random.default_rng(seed)
            assignment, phase = suggest(history, space, rng, config)
            try:
                value, metrics = objective(assignment)
                if not math.isfinite(value):
                    raise RagTunerError(f"objective is not finite: {value}")
                rec = TrialRecord(next_trial, phase, assignment, float(value), metrics, seed)
            except RagTunerError as exc:
                log.warning("trial %d failed: %s", next_trial, exc)
                rec = TrialRecord(next_trial, phase, assignment, None, {}, seed, error=str(exc))
            if timestamp is not None:
                rec = replace(rec, timestamp=timestamp())
            history.append(rec)
            if writer is not None:
                writer.write(rec)
            new += 1
            next_trial += 1
            if progress is not None:
                progress(rec, best_record(history))
            if len(history) < config.budget and converged(history, config, space):
                stopped_early = True
                break
    finally:
        if writer is not None:
            writer.close()
    return TuneResult(best_record(history), history, new, stopped_early)
