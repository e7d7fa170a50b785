"""Observation traces: one JSON trial record per line, append-only."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from ..errors import OutOfBounds, ParseError, SpecError
from .space import SearchSpace

log = logging.getLogger(__name__)

PHASES = ("random", "bayesian", "warm")


@dataclass
class TrialRecord:
    trial: int
    phase: str
    assignment: dict[str, Any]
    objective: float | None
    metrics: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    timestamp: str | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.objective is None

    def to_json(self) -> dict:
        rec = {
            "trial": self.trial,
            "phase": self.phase,
            "assignment": self.assignment,
            "metrics": self.metrics,
            "seed": self.seed,
            "timestamp": self.timestamp,
        }
        if self.failed:
            rec["failed"] = True
            rec["error"] = self.error
        else:
            rec["objective"] = self.objective
        return rec

    def to_line(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, rec: dict) -> "TrialRecord":
        failed = bool(rec.get("failed"))
        objective = None if failed else rec["objective"]
        if objective is not None:
            objective = float(objective)
        return cls(
            trial=int(rec["trial"]),
            phase=str(rec["phase"]),
            assignment=dict(rec["assignment"]),
            objective=objective,
            metrics=dict(rec.get("metrics") or {}),
            seed=int(rec.get("seed", 0)),
            timestamp=rec.get("timestamp"),
            error=rec.get("error"),
        )


def read_trace(path: str | Path) -> list[TrialRecord]:
    out = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, 1):
            if not line.strip():
                continue
            try:
                out.append(TrialRecord.from_json(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, exc.msg) from None
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(lineno, f"bad trial record: {exc}") from None
    return out


def compatible(record: TrialRecord, space: SearchSpace) -> bool:
    try:
        space.validate(record.assignment)
    except (SpecError, OutOfBounds):
        return False
    return True


def warm_start_load(path: str | Path, space: SearchSpace) -> list[TrialRecord]:
    """Load prior trials that fit ``space``, relabelled as phase ``warm``."""
    loaded, skipped = [], 0
    for rec in read_trace(path):
        if compatible(rec, space):
            loaded.append(replace(rec, phase="warm", assignment=space.validate(rec.assignment)))
        else:
            skipped += 1
    if skipped:
        log.warning("warm start: skipped %d record(s) incompatible with the search space", skipped)
    return loaded


def best_record(records: Iterable[TrialRecord]) -> TrialRecord | None:
    """Highest objective among successful trials; the earliest wins ties."""
    best = None
    for rec in records:
        if not rec.failed and (best is None or rec.objective > best.objective):
            best = rec
    return best


class TraceWriter:
    """Appends records and flushes each one to disk before returning."""

    def __init__(self, path: str | Path, append: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fp = open(self.path, "a" if append else "w", encoding="utf-8", newline="\n")

    def write(self, record: TrialRecord) -> None:
        self._fp.write(record.to_line())
        self._fp.flush()
        os.fsync(self._fp.fileno())

    def close(self) -> None:
        self._fp.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
