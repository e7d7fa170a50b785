"""Declarative RAG pipelines over a domain-element store, with Bayesian tuning."""

from .dem import DemStore, Element, validate_store
from .dsl import PipelineSpec, apply_assignment, canonical_form, load_spec, parse_spec, validate_against_registry
from .evaluation import ObjectiveConfig, f1_answer, load_dataset, recall_at_k, score_run
from .runtime import ComponentRegistry, Contract, build_pipeline, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "ComponentRegistry",
    "Contract",
    "DemStore",
    "Element",
    "ObjectiveConfig",
    "PipelineSpec",
    "apply_assignment",
    "build_pipeline",
    "canonical_form",
    "f1_answer",
    "load_dataset",
    "load_spec",
    "parse_spec",
    "recall_at_k",
    "run_pipeline",
    "score_run",
    "validate_against_registry",
    "validate_store",
]
