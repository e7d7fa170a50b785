"""Bayesian hyper-parameter tuning."""

from .acquisition import expected_improvement
from .engine import Suggestion, TuneResult, TunerConfig, suggest, tune
from .gp import GpSurrogate, gp_fit
from .objective import PipelineObjective, select_trial, tune_spec
from .space import SearchSpace
from .trace import TrialRecord, read_trace, warm_start_load

__all__ = [
    "GpSurrogate",
    "PipelineObjective",
    "SearchSpace",
    "Suggestion",
    "TrialRecord",
    "TuneResult",
    "TunerConfig",
    "expected_improvement",
    "gp_fit",
    "read_trace",
    "select_trial",
    "suggest",
    "tune",
    "tune_spec",
    "warm_start_load",
]
