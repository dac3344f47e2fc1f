"""Adaptive localization: compressive binary search plus exact edge search.

The matrix (treated as a torus) is tiled four times by ``2k1 x 2k2``
tiles, shifted by ``(0, 0)``, ``(k1, k2)``, ``(k1, 0)`` and ``(0, k2)``.
Any contiguous ``k1 x k2`` block sits entirely inside one tile of one of
the tilings. A binary search over each tiling narrows the activation
down to one tile per tiling; the union of the four winners is then
scanned column by column (and row by row) to pin down the exact block.

Budget schedule for a total ``M``: with unit ``m = M // 22``, the four
binary searches get ``m`` each, the two first-active-line scans get
``8m`` each and the two edge searches get ``m`` each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import (STREAM_INSTANCE, Block, ParameterError, RngHandle, SignalInstance,
                   as_generator, check_dims, sample_instance)
from .measure import (BlockSupportSensing, BudgetLedger, MeasurementRecord, column_sensing,
                      measure_many, row_sensing)

LABELS = ("D1", "D2", "D3", "D4")
SHIFTS = {"D1": (0, 0), "D2": (1, 1), "D3": (1, 0), "D4": (0, 1)}

UNITS_CBS = 4
UNITS_STAGE1 = 16
UNITS_SEARCH = 2
UNITS_TOTAL = UNITS_CBS + UNITS_STAGE1 + UNITS_SEARCH


def _is_pow2(v: int) -> bool:
    return v >= 1 and v & (v - 1) == 0


def padded_size(n: int, k: int) -> int:
    """Smallest ``2k * 2**a >= n``."""
    size = 2 * k
    while size < n:
        size *= 2
    return size


@dataclass(frozen=True, eq=False)
class BlockCollection:
    """One shifted tiling of an ``n1 x n2`` torus by ``2k1 x 2k2`` tiles.

    Tiles are ordered with the row position varying fastest.
    """

    label: str
    shape: tuple[int, int]
    k1: int
    k2: int
    row_shift: int
    col_shift: int
    blocks: tuple[Block, ...]

    @property
    def tile_size(self) -> int:
        return 4 * self.k1 * self.k2

    @property
    def grid(self) -> tuple[int, int]:
        return self.shape[0] // (2 * self.k1), self.shape[1] // (2 * self.k2)

    def __len__(self) -> int:
        return len(self.blocks)

    def _axis_overlap(self, axis: int, start: int, length: int) -> np.ndarray:
        n = self.shape[axis]
        k = (self.k1, self.k2)[axis]
        shift = (self.row_shift, self.col_shift)[axis]
        count = self.grid[axis]
        idx = (np.arange(count)[:, None] * 2 * k + shift + np.arange(2 * k)) % n
        return ((idx >= start) & (idx < start + length)).sum(axis=1)

    @lru_cache(maxsize=64)
    def overlap_counts(self, block: Block) -> np.ndarray:
        """Cells each tile shares with a non-wrapping ``block``."""
        ro = self._axis_overlap(0, block.row_start - 1, block.height)
        co = self._axis_overlap(1, block.col_start - 1, block.width)
        # tile t = b * P1 + a sits at tile-row a, tile-column b
        out = np.outer(co, ro).ravel()
        out.flags.writeable = False
        return out


@lru_cache(maxsize=128)
def build_collections(n1: int, n2: int, k1: int, k2: int) -> dict[str, BlockCollection]:
    """The four shifted tilings; ``n1, n2`` must already be dyadic multiples of
    ``2k1, 2k2`` (see :func:`padded_size`)."""
    check_dims(n1, n2, k1, k2)
    if n1 % (2 * k1) or n2 % (2 * k2):
        raise ParameterError(f"{n1}x{n2} is not tiled by {2 * k1}x{2 * k2} blocks")
    p1, p2 = n1 // (2 * k1), n2 // (2 * k2)
    if not (_is_pow2(p1) and _is_pow2(p2)):
        raise ParameterError(f"tile grid {p1}x{p2} is not dyadic; pad the matrix first")
    out = {}
    for label in LABELS:
        rs, cs = SHIFTS[label][0] * k1, SHIFTS[label][1] * k2
        blocks = []
        for b in range(p2):
            for a in range(p1):
                r0, c0 = a * 2 * k1 + rs, b * 2 * k2 + cs
                wrap = r0 + 2 * k1 > n1 or c0 + 2 * k2 > n2
                blocks.append(Block(r0 + 1, c0 + 1, 2 * k1, 2 * k2, wrap=wrap))
        out[label] = BlockCollection(label, (n1, n2), k1, k2, rs, cs, tuple(blocks))
    return out


def cbs_allocation(m: int, s0: int) -> list[int]:
    """Per-level repeat counts ``floor((m - s0) s 2**-(s+1)) + 1`` for ``s = 1..s0``."""
    return [((m - s0) * s) // (2 ** (s + 1)) + 1 for s in range(1, s0 + 1)]


def cbs_run(instance: SignalInstance, collection: BlockCollection, m: int, rng,
            ledger: BudgetLedger | None = None, transcript: list | None = None) -> Block:
    """Compressive binary search for the tile holding the activation.

    At each level the surviving tiles are split into two halves, measured
    with ``+v`` on the first half and ``-v`` on the second (unit Frobenius
    norm), and the half with a positive total is kept.
    """
    p = len(collection)
    s0 = p.bit_length() - 1
    if not _is_pow2(p):
        raise ParameterError(f"collection size {p} is not a power of two")
    if m < 2 * s0:
        raise ParameterError(f"binary search over {p} tiles needs m >= {2 * s0}, got {m}")
    g = as_generator(rng)
    u = collection.tile_size
    lo, hi = 0, p
    for s, m_s in enumerate(cbs_allocation(m, s0), start=1):
        mid = (lo + hi) // 2
        value = math.sqrt(2.0 ** -(s0 - s + 1) / u)
        x = BlockSupportSensing(collection, range(lo, mid), range(mid, hi), value)
        y = measure_many(instance, x, m_s, g, ledger, phase="cbs",
                         transcript=transcript, tag=f"cbs-level-{s}")
        if y.sum() > 0:
            hi = mid
        else:
            lo = mid
    return collection.blocks[lo]


@dataclass(frozen=True)
class Region:
    """Union of row and column index sets (1-based, on the torus)."""

    shape: tuple[int, int]
    rows: tuple[int, ...]
    cols: tuple[int, ...]

    @property
    def height(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return len(self.cols)

    def contains_block(self, block: Block) -> bool:
        rows = {r + 1 for r in block.row_index(self.shape[0])}
        cols = {c + 1 for c in block.col_index(self.shape[1])}
        return rows <= set(self.rows) and cols <= set(self.cols)

    def transpose(self) -> "Region":
        return Region((self.shape[1], self.shape[0]), self.cols, self.rows)


def region_from_blocks(blocks, shape: tuple[int, int]) -> Region:
    rows = sorted({int(r) + 1 for b in blocks for r in b.row_index(shape[0])})
    cols = sorted({int(c) + 1 for b in blocks for c in b.col_index(shape[1])})
    return Region(tuple(shape), tuple(rows), tuple(cols))


def approx_localize(instance: SignalInstance, m_unit: int, rng,
                    ledger: BudgetLedger | None = None,
                    transcript: list | None = None) -> tuple[Region, dict[str, Block]]:
    """Binary search on all four tilings; returns the union of the winners.

    The union holds at most ``8k1`` rows and ``8k2`` columns.
    """
    g = as_generator(rng)
    colls = build_collections(instance.n1, instance.n2, instance.k1, instance.k2)
    winners = {label: cbs_run(instance, colls[label], m_unit, g, ledger, transcript)
               for label in LABELS}
    return region_from_blocks(winners.values(), instance.shape), winners


@dataclass(frozen=True)
class ExactLocConfig:
    """Budget split for the exact stage on one axis.

    ``proof``: each candidate line gets an equal share of ``8m`` and each
    binary-search probe gets ``floor(m / (3 ln k))``.
    ``box``: each candidate gets ``floor(m / 5)`` and each probe
    ``floor(m / (6 log2 k))``.
    """

    variant: str = "proof"

    def __post_init__(self):
        if self.variant not in ("proof", "box"):
            raise ParameterError(f"unknown variant {self.variant!r}")

    def per_candidate(self, m_unit: int, n_candidates: int) -> int:
        if self.variant == "proof":
            return (8 * m_unit) // n_candidates
        return m_unit // 5

    def per_probe(self, m_unit: int, k: int) -> int:
        if self.variant == "proof":
            return int(m_unit // (3 * math.log(k)))
        return int(m_unit // (6 * math.log2(k)))


def search_threshold(sigma: float, m_b: int, k: int, delta: float) -> float:
    """Cutoff on a probe's sum of ``m_b`` repeats: ``sqrt(2 sigma^2 m_b ln(3 log2(k) / delta))``."""
    return math.sqrt(2.0 * sigma ** 2 * m_b * math.log(3.0 * math.log2(k) / delta))


def exact_localize_columns(instance: SignalInstance, region: Region, m_unit: int,
                           delta: float, rng, ledger: BudgetLedger | None = None,
                           variant: str = "proof",
                           transcript: list | None = None) -> tuple[int, ...]:
    """Find the ``k2`` active columns inside ``region``.

    Candidate columns are those region columns at offsets that are
    multiples of ``k2``; exactly one of them is active when the region
    holds the block. The strongest candidate ``l`` is active, so the last
    active column lies in ``[l, l + k2)``; a halving search over that
    window with a fixed threshold locates it.
    """
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")
    cfg = ExactLocConfig(variant)
    g = as_generator(rng)
    n2 = instance.n2
    k2 = instance.k2
    cands = [c for c in region.cols if (c - 1) % k2 == 0]
    if not cands:
        raise ParameterError("region holds no candidate column")
    reps = cfg.per_candidate(m_unit, len(cands))
    if reps < 1:
        raise ParameterError(f"budget unit {m_unit} too small for {len(cands)} candidates")
    sums = [measure_many(instance, column_sensing(instance.shape, region.rows, c), reps, g,
                         ledger, phase="stage1", transcript=transcript,
                         tag="exact-col").sum()
            for c in cands]
    lead = cands[int(np.argmax(sums))] - 1
    if k2 == 1:
        return (lead + 1,)
    m_b = cfg.per_probe(m_unit, k2)
    if m_b < 1:
        raise ParameterError(f"budget unit {m_unit} too small for the edge search")
    tau = search_threshold(instance.sigma, m_b, k2, delta)
    lo, hi = lead, lead + k2
    while hi - lo > 1:
        c = (lo + hi) // 2
        x = column_sensing(instance.shape, region.rows, c % n2 + 1)
        y = measure_many(instance, x, m_b, g, ledger, phase="search",
                         transcript=transcript, tag="exact-col")
        if y.sum() >= tau:
            lo = c
        else:
            hi = c
    return tuple((lo - k2 + 1 + t) % n2 + 1 for t in range(k2))


def exact_localize_rows(instance: SignalInstance, region: Region, m_unit: int,
                        delta: float, rng, ledger: BudgetLedger | None = None,
                        variant: str = "proof",
                        transcript: list | None = None) -> tuple[int, ...]:
    """Row counterpart of :func:`exact_localize_columns`, run on the transpose."""
    sub = [] if transcript is not None else None
    rows = exact_localize_columns(instance.transpose(), region.transpose(), m_unit, delta,
                                  rng, ledger, variant, sub)
    if transcript is not None:
        transcript.extend(_transpose_record(r, instance.shape) for r in sub)
    return rows


def _transpose_record(rec, shape):
    return MeasurementRecord(rec.y, row_sensing(shape, rec.x.col, rec.x.rows), "exact-row")


@dataclass
class ActiveResult:
    block: Block
    region: Region
    winners: dict[str, Block]
    ledger: BudgetLedger
    m_unit: int
    padded_shape: tuple[int, int]
    transcript: list | None = field(default=None, repr=False)

    @property
    def spent(self) -> dict[str, int]:
        return dict(self.ledger.spent_per_phase)


def min_active_budget(n1: int, n2: int, k1: int, k2: int) -> float:
    """Smallest total budget accepted by :func:`localize_active`."""
    N1, N2 = padded_size(n1, k1), padded_size(n2, k2)
    s0 = ((N1 // (2 * k1)) * (N2 // (2 * k2))).bit_length() - 1
    return UNITS_TOTAL * max(3 * math.log(n1 * n2), 2 * s0)


def localize_active(instance: SignalInstance, total_budget: int, delta: float, rng,
                    variant: str = "proof", record: bool = False) -> ActiveResult:
    """Full adaptive pipeline under a total budget of ``total_budget`` measurements.

    ``delta`` is the failure level of each individual stage; the whole
    procedure fails with probability at most ``8 * delta`` above the
    sufficient SNR. Non-dyadic matrices are padded with zero signal.
    """
    n1, n2, k1, k2 = instance.n1, instance.n2, instance.k1, instance.k2
    need = min_active_budget(n1, n2, k1, k2)
    if total_budget < need:
        raise ParameterError(f"budget {total_budget} below the minimum {math.ceil(need)}")
    m = total_budget // UNITS_TOTAL
    ledger = BudgetLedger(int(total_budget), caps={"cbs": UNITS_CBS * m,
                                                   "stage1": UNITS_STAGE1 * m,
                                                   "search": UNITS_SEARCH * m})
    N1, N2 = padded_size(n1, k1), padded_size(n2, k2)
    work = instance if (N1, N2) == (n1, n2) else instance.with_params(n1=N1, n2=N2)
    g = rng.generator() if isinstance(rng, RngHandle) else as_generator(rng)
    transcript = [] if record else None

    region, winners = approx_localize(work, m, g, ledger, transcript)
    cols = exact_localize_columns(work, region, m, delta, g, ledger, variant, transcript)
    rows = exact_localize_rows(work, region, m, delta, g, ledger, variant, transcript)

    wrap = rows[0] + k1 - 1 > N1 or cols[0] + k2 - 1 > N2
    block = Block(rows[0], cols[0], k1, k2, wrap=wrap)
    return ActiveResult(block, region, winners, ledger, m, (N1, N2), transcript)


def active_trial(n1: int, n2: int, k1: int, k2: int, mu: float, sigma: float,
                 total_budget: int, delta: float, handle: RngHandle,
                 variant: str = "proof") -> dict:
    inst = sample_instance(n1, n2, k1, k2, mu, sigma, handle.child(STREAM_INSTANCE).generator())
    res = localize_active(inst, total_budget, delta, handle.child(1), variant)
    return {"success": res.block == inst.b_star, "est": res.block, "true": inst.b_star,
            "spent": res.spent, "spent_total": res.ledger.spent, "m_unit": res.m_unit}


def rescaled_active_snr(n: int, k: int, m: int, snr: float) -> float:
    """Small-block rescaling ``sqrt(m) k^2 snr / n``."""
    return math.sqrt(m) * k * k * snr / n
