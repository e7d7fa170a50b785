"""Mixed-type search spaces mapped onto the unit cube.

Floats and ints map affinely to one coordinate each (ints round on decode);
a categorical with ``m`` choices takes an ``m``-wide one-hot block and
decodes by argmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from ..dsl import PipelineSpec, TunableDecl
from ..errors import OutOfBounds, SpecError


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class Dimension:
    decl: TunableDecl
    offset: int
    width: int


class SearchSpace:
    def __init__(self, decls: Sequence[TunableDecl]):
        dims = []
        offset = 0
        for d in decls:
            width = len(d.choices) if d.kind == "categorical" else 1
            dims.append(Dimension(d, offset, width))
            offset += width
        self.dims = dims
        self.size = offset

    @classmethod
    def from_spec(cls, spec: PipelineSpec) -> "SearchSpace":
        return cls(spec.tunables)

    @property
    def paths(self) -> list[str]:
        return [d.decl.path for d in self.dims]

    def __len__(self) -> int:
        return len(self.dims)

    def validate(self, assignment: Mapping[str, Any]) -> dict[str, Any]:
        """Coerce a full assignment, raising on missing, extra or out-of-range values."""
        if set(assignment) != set(self.paths):
            raise SpecError(f"assignment paths {sorted(assignment)} do not match {sorted(self.paths)}")
        return {d.decl.path: d.decl.coerce(assignment[d.decl.path]) for d in self.dims}

    def encode(self, assignment: Mapping[str, Any]) -> np.ndarray:
        a = self.validate(assignment)
        v = np.zeros(self.size)
        for dim in self.dims:
            decl, value = dim.decl, a[dim.decl.path]
            if decl.kind == "categorical":
                v[dim.offset + decl.choices.index(value)] = 1.0
            else:
                v[dim.offset] = (value - decl.low) / (decl.high - decl.low)
        return v

    def decode(self, vector: Sequence[float]) -> dict[str, Any]:
        v = np.clip(np.asarray(vector, dtype=np.float64), 0.0, 1.0)
        if v.shape != (self.size,):
            raise OutOfBounds("<vector>", f"shape {v.shape}, expected ({self.size},)")
        out: dict[str, Any] = {}
        for dim in self.dims:
            decl = dim.decl
            if decl.kind == "categorical":
                out[decl.path] = decl.choices[int(np.argmax(v[dim.offset : dim.offset + dim.width]))]
                continue
            x = decl.low + float(v[dim.offset]) * (decl.high - decl.low)
            if decl.kind == "int":
                out[decl.path] = min(max(round_half_away(x), decl.low), decl.high)
            else:
                out[decl.path] = min(max(x, decl.low), decl.high)
        return out

    def snap(self, vectors: np.ndarray) -> np.ndarray:
        """Project points onto values the space can actually take.

        Row-wise equivalent to ``encode(decode(row))``.
        """
        v = np.clip(np.atleast_2d(np.asarray(vectors, dtype=np.float64)), 0.0, 1.0).copy()
        for dim in self.dims:
            decl, cols = dim.decl, slice(dim.offset, dim.offset + dim.width)
            if decl.kind == "categorical":
                block = np.zeros_like(v[:, cols])
                block[np.arange(len(v)), np.argmax(v[:, cols], axis=1)] = 1.0
                v[:, cols] = block
            elif decl.kind == "int":
                x = decl.low + v[:, dim.offset] * (decl.high - decl.low)
                x = np.clip(np.sign(x) * np.floor(np.abs(x) + 0.5), decl.low, decl.high)
                v[:, dim.offset] = (x - decl.low) / (decl.high - decl.low)
        return v
