"""Linear measurement model ``y = tr(A X) + eps`` and budget accounting.

Sensing matrices come in a few structured flavours so that adaptive
schemes never materialise an ``n1 x n2`` array per measurement. Each
class knows its Frobenius norm, its dense form and its inner product
with a :class:`~blocksense.core.SignalInstance`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import Block, BudgetError, ParameterError, SignalInstance, as_generator


class SensingMatrix:
    shape: tuple[int, int]
    kind: str = "abstract"

    def frobenius_norm(self) -> float:
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        raise NotImplementedError

    def inner(self, instance: SignalInstance) -> float:
        """``tr(A X)`` for the instance's activation matrix ``A``."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "shape": list(self.shape)}


@dataclass(frozen=True, eq=False)
class DenseSensing(SensingMatrix):
    values: np.ndarray
    kind = "dense"

    @property
    def shape(self):
        return self.values.shape

    def frobenius_norm(self):
        return float(np.linalg.norm(self.values))

    def to_dense(self):
        return self.values

    def inner(self, instance):
        b = instance.b_star
        r0, c0 = b.row_start - 1, b.col_start - 1
        return instance.mu * float(self.values[r0:r0 + b.height, c0:c0 + b.width].sum())

    def describe(self):
        return {**super().describe(), "values": self.values.tolist()}


@dataclass(frozen=True)
class ConstantSensing(SensingMatrix):
    shape: tuple[int, int]
    value: float
    kind = "constant"

    def frobenius_norm(self):
        return abs(self.value) * math.sqrt(self.shape[0] * self.shape[1])

    def to_dense(self):
        return np.full(self.shape, self.value)

    def inner(self, instance):
        return instance.mu * instance.b_star.size * self.value

    def describe(self):
        return {**super().describe(), "value": self.value}


@dataclass(frozen=True)
class BlockSupportSensing(SensingMatrix):
    """``+value`` on the tiles ``plus`` and ``-value`` on ``minus`` of a tiling.

    ``collection`` is any object exposing ``shape``, ``blocks``, ``tile_size``
    and ``overlap_counts(block)`` (see :class:`blocksense.active.BlockCollection`).
    Tiles must be pairwise disjoint.
    """

    collection: object
    plus: range
    minus: range
    value: float
    kind = "block-support"

    @property
    def shape(self):
        return self.collection.shape

    def frobenius_norm(self):
        n_cells = (len(self.plus) + len(self.minus)) * self.collection.tile_size
        return abs(self.value) * math.sqrt(n_cells)

    def to_dense(self):
        n1, n2 = self.shape
        out = np.zeros(self.shape)
        for idx, sign in ((self.plus, 1.0), (self.minus, -1.0)):
            for t in idx:
                out[np.ix_(*_block_index(self.collection.blocks[t], n1, n2))] = sign * self.value
        return out

    def inner(self, instance):
        ov = self.collection.overlap_counts(instance.b_star)
        s = ov[self.plus.start:self.plus.stop].sum() - ov[self.minus.start:self.minus.stop].sum()
        return instance.mu * self.value * float(s)

    def describe(self):
        return {**super().describe(), "collection": getattr(self.collection, "label", "?"),
                "plus": [self.plus.start, self.plus.stop],
                "minus": [self.minus.start, self.minus.stop], "value": self.value}


@dataclass(frozen=True)
class ColumnSensing(SensingMatrix):
    """Equal weights ``|rows|**-0.5`` on ``rows`` of one column (1-based)."""

    shape: tuple[int, int]
    rows: tuple[int, ...]
    col: int
    kind = "column"

    @property
    def value(self) -> float:
        return 1.0 / math.sqrt(len(self.rows))

    def frobenius_norm(self):
        return self.value * math.sqrt(len(self.rows))

    def to_dense(self):
        out = np.zeros(self.shape)
        out[np.asarray(self.rows) - 1, self.col - 1] = self.value
        return out

    def inner(self, instance):
        b = instance.b_star
        if not b.col_start <= self.col < b.col_start + b.width:
            return 0.0
        hits = sum(1 for r in self.rows if b.row_start <= r < b.row_start + b.height)
        return instance.mu * self.value * hits

    def describe(self):
        return {**super().describe(), "rows": list(self.rows), "col": self.col}


@dataclass(frozen=True)
class RowSensing(SensingMatrix):
    """Mirror image of :class:`ColumnSensing`."""

    shape: tuple[int, int]
    row: int
    cols: tuple[int, ...]
    kind = "row"

    @property
    def value(self) -> float:
        return 1.0 / math.sqrt(len(self.cols))

    def frobenius_norm(self):
        return self.value * math.sqrt(len(self.cols))

    def to_dense(self):
        out = np.zeros(self.shape)
        out[self.row - 1, np.asarray(self.cols) - 1] = self.value
        return out

    def inner(self, instance):
        b = instance.b_star
        if not b.row_start <= self.row < b.row_start + b.height:
            return 0.0
        hits = sum(1 for c in self.cols if b.col_start <= c < b.col_start + b.width)
        return instance.mu * self.value * hits

    def describe(self):
        return {**super().describe(), "row": self.row, "cols": list(self.cols)}


def _block_index(block: Block, n1: int, n2: int):
    return block.row_index(n1), block.col_index(n2)


def gaussian_sensing(n1: int, n2: int, rng) -> DenseSensing:
    """iid ``N(0, 1/(n1 n2))`` entries, so ``E||X||_F^2 = 1``."""
    g = as_generator(rng)
    return DenseSensing(g.standard_normal((n1, n2)) / math.sqrt(n1 * n2))


def allones_sensing(n1: int, n2: int) -> ConstantSensing:
    return ConstantSensing((n1, n2), 1.0 / math.sqrt(n1 * n2))


def column_sensing(shape: tuple[int, int], rows: Iterable[int], col: int) -> ColumnSensing:
    rows = tuple(int(r) for r in rows)
    if not rows:
        raise ParameterError("column sensing needs a nonempty row set")
    if len(set(rows)) != len(rows):
        raise ParameterError("duplicate rows in column sensing")
    if not (1 <= col <= shape[1]) or min(rows) < 1 or max(rows) > shape[0]:
        raise ParameterError("column sensing support outside the matrix")
    return ColumnSensing(tuple(shape), rows, int(col))


def row_sensing(shape: tuple[int, int], row: int, cols: Iterable[int]) -> RowSensing:
    cols = tuple(int(c) for c in cols)
    if not cols:
        raise ParameterError("row sensing needs a nonempty column set")
    if len(set(cols)) != len(cols):
        raise ParameterError("duplicate columns in row sensing")
    if not (1 <= row <= shape[0]) or min(cols) < 1 or max(cols) > shape[1]:
        raise ParameterError("row sensing support outside the matrix")
    return RowSensing(tuple(shape), int(row), cols)


def trace_inner(instance: SignalInstance, x: SensingMatrix) -> float:
    if tuple(x.shape) != instance.shape:
        raise ParameterError(f"sensing shape {tuple(x.shape)} != matrix shape {instance.shape}")
    return x.inner(instance)


@dataclass
class BudgetLedger:
    """Counts measurements per phase against a total (and optional per-phase caps)."""

    total_allowed: int
    caps: dict[str, int] = field(default_factory=dict)
    spent_per_phase: dict[str, int] = field(default_factory=dict)

    @property
    def spent(self) -> int:
        return sum(self.spent_per_phase.values())

    @property
    def remaining(self) -> int:
        return self.total_allowed - self.spent

    def spend(self, phase: str, count: int = 1) -> None:
        if count < 0:
            raise ParameterError("negative measurement count")
        if count > self.remaining:
            raise BudgetError(f"{phase}: requested {count}, only {self.remaining} "
                              f"of {self.total_allowed} left")
        used = self.spent_per_phase.get(phase, 0)
        cap = self.caps.get(phase)
        if cap is not None and used + count > cap:
            raise BudgetError(f"{phase}: cap {cap} exceeded ({used} + {count})")
        self.spent_per_phase[phase] = used + count


@dataclass(frozen=True)
class MeasurementRecord:
    y: float
    x: SensingMatrix
    phase_tag: str


def measure_many(instance: SignalInstance, x: SensingMatrix, count: int, rng,
                 ledger: BudgetLedger | None, phase: str = "passive",
                 transcript: list | None = None, tag: str | None = None) -> np.ndarray:
    """Repeat the same design ``count`` times; returns the observations."""
    if ledger is not None:
        ledger.spend(phase, count)
    g = as_generator(rng)
    y = trace_inner(instance, x) + instance.sigma * g.standard_normal(count)
    if transcript is not None:
        t = tag or phase
        transcript.extend(MeasurementRecord(float(v), x, t) for v in y)
    return y


def measure(instance: SignalInstance, x: SensingMatrix, rng,
            ledger: BudgetLedger | None = None, phase: str = "passive") -> MeasurementRecord:
    y = measure_many(instance, x, 1, rng, ledger, phase)
    return MeasurementRecord(float(y[0]), x, phase)


def write_transcript(records: Sequence[MeasurementRecord], path) -> None:
    """One JSON object per line: ``{"phase": ..., "y": ..., "x": {...}}``."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"phase": rec.phase_tag, "y": rec.y, "x": rec.x.describe()}))
            fh.write("\n")


def read_transcript(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
