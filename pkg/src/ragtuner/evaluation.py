"""QA datasets, Recall@K, token F1 and the scalar tuning objective."""

from __future__ import annotations

import json
import math
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateQid, EmptyGold, EvaluationError, MissingQuery, ParseError
from .runtime import RunResult


@dataclass(frozen=True)
class QaExample:
    qid: str
    question: str
    gold_answer: str
    gold_passage_keys: frozenset[str]


def load_dataset(path: str | Path) -> list[QaExample]:
    """Read JSONL records ``{"qid", "question", "answer", "gold_passages"}`` in file order."""
    out: list[QaExample] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, exc.msg) from None
            if not isinstance(rec, dict):
                raise ParseError(lineno, "record must be an object")
            for key in ("qid", "question", "answer", "gold_passages"):
                if key not in rec:
                    raise ParseError(lineno, f"missing field {key!r}")
            if not isinstance(rec["gold_passages"], list):
                raise ParseError(lineno, "gold_passages must be a list")
            qid = str(rec["qid"])
            if qid in seen:
                raise DuplicateQid(f"line {lineno}: qid {qid!r} repeats")
            seen.add(qid)
            out.append(QaExample(qid, str(rec["question"]), str(rec["answer"]), frozenset(map(str, rec["gold_passages"]))))
    return out


def recall_at_k(retrieved: Sequence[str], gold: Iterable[str], k: int) -> float:
    """Fraction of gold keys found among the first ``k`` retrieved keys."""
    gold = set(gold)
    if not gold:
        raise EmptyGold("recall needs at least one gold key")
    if k < 1:
        raise ValueError("k must be positive")
    return len(gold.intersection(retrieved[:k])) / len(gold)


_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(s: str) -> list[str]:
    s = s.lower().translate(_PUNCT_TABLE)
    return _ARTICLES.sub(" ", s).split()


def f1_answer(pred: str, gold: str) -> float:
    p, g = normalize_answer(pred), normalize_answer(gold)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    overlap = sum((Counter(p) & Counter(g)).values())
    if overlap == 0:
        return 0.0
    precision, recall = overlap / len(p), overlap / len(g)
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ObjectiveConfig:
    """Objective = recall_weight * R@k + f1_weight * F1 + sum(extra * run scalar)."""

    k: int = 5
    recall_weight: float = 0.5
    f1_weight: float = 0.5
    extra: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_json(cls, obj: Mapping | None) -> "ObjectiveConfig":
        obj = dict(obj or {})
        weights = dict(obj.pop("weights", {}))
        k = int(obj.pop("k", 5))
        if obj:
            raise ValueError(f"unknown objective keys {sorted(obj)}")
        recall = float(weights.pop("recall", 0.5))
        f1 = float(weights.pop("f1", 0.5))
        return cls(k, recall, f1, {key: float(v) for key, v in weights.items()})


@dataclass
class QueryMetrics:
    qid: str
    recall_at_k: float
    f1: float


@dataclass
class MetricReport:
    per_query: list[QueryMetrics]
    k: int
    mean_recall: float
    mean_f1: float
    objective: float
    scalars: dict[str, float] = field(default_factory=dict)

    def summary(self) -> dict:
        out = {"k": self.k, "recall_at_k": self.mean_recall, "f1": self.mean_f1, "n": len(self.per_query)}
        out.update(self.scalars)
        return out

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "mean_recall_at_k": self.mean_recall,
            "mean_f1": self.mean_f1,
            "objective": self.objective,
            "scalars": self.scalars,
            "per_query": [{"qid": m.qid, "recall_at_k": m.recall_at_k, "f1": m.f1} for m in self.per_query],
        }


def passage_keys(run: RunResult, ids: Sequence[str]) -> list[str]:
    """Map retrieved element ids to passage keys via their ``doc_id`` property."""
    if run.store is None:
        return list(ids)
    keys = []
    for eid in ids:
        doc = run.store.get(eid).props.get("doc_id") if eid in run.store else None
        keys.append(str(doc) if doc is not None else eid)
    return keys


def _mean(values: list[float]) -> float:
    # fsum is order-independent, so the objective does not depend on dataset order
    return math.fsum(values) / len(values) if values else 0.0


def score_run(run: RunResult, dataset: Sequence[QaExample], config: ObjectiveConfig | None = None) -> MetricReport:
    config = config or ObjectiveConfig()
    by_qid = {r.qid: r for r in run.records}
    per_query = []
    for ex in dataset:
        rec = by_qid.get(ex.qid)
        if rec is None:
            raise MissingQuery(ex.qid)
        r = recall_at_k(passage_keys(run, rec.retrieved), ex.gold_passage_keys, config.k)
        per_query.append(QueryMetrics(ex.qid, r, f1_answer(rec.answer, ex.gold_answer)))
    mean_r = _mean([m.recall_at_k for m in per_query])
    mean_f = _mean([m.f1 for m in per_query])
    scalars = {key: run.scalars[key] for key in sorted(config.extra) if key in run.scalars}
    missing = set(config.extra) - set(scalars)
    if missing:
        raise EvaluationError(f"run did not publish scalar(s) {sorted(missing)}")
    terms = [config.recall_weight * mean_r, config.f1_weight * mean_f]
    terms += [config.extra[key] * scalars[key] for key in scalars]
    return MetricReport(per_query, config.k, mean_r, mean_f, math.fsum(terms), scalars)
