"""Domain types shared by every part of the toolkit.

Indices in the public data model are 1-based: a block starting at
``(1, 1)`` covers the top-left corner of the matrix. Internally the
numerical code works with 0-based offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np


class ParameterError(ValueError):
    """Invalid dimensions, levels or other user supplied parameters."""


class BudgetError(RuntimeError):
    """A measurement was requested beyond the allowed budget."""


def check_dims(n1: int, n2: int, k1: int, k2: int) -> None:
    for name, v in (("n1", n1), ("n2", n2), ("k1", k1), ("k2", k2)):
        if int(v) != v or v < 1:
            raise ParameterError(f"{name} must be a positive integer, got {v!r}")
    if k1 > n1 or k2 > n2:
        raise ParameterError(f"block ({k1}x{k2}) does not fit in ({n1}x{n2})")


@dataclass(frozen=True)
class Block:
    """Rectangular index set ``rows x cols``.

    With ``wrap=True`` the intervals are read modulo the owning matrix
    shape (torus indexing), which the shifted tilings need at the edges.
    """

    row_start: int
    col_start: int
    height: int
    width: int
    wrap: bool = False

    def __post_init__(self):
        if self.row_start < 1 or self.col_start < 1:
            raise ParameterError("block indices are 1-based")
        if self.height < 1 or self.width < 1:
            raise ParameterError("block extent must be positive")

    @property
    def size(self) -> int:
        return self.height * self.width

    def fits(self, n1: int, n2: int) -> bool:
        if self.wrap:
            return self.row_start <= n1 and self.col_start <= n2 and \
                self.height <= n1 and self.width <= n2
        return self.row_start + self.height - 1 <= n1 and \
            self.col_start + self.width - 1 <= n2

    def row_index(self, n1: int | None = None) -> np.ndarray:
        """0-based row offsets, reduced modulo ``n1`` for wrapped blocks."""
        r = self.row_start - 1 + np.arange(self.height)
        if self.wrap:
            if n1 is None:
                raise ParameterError("wrapped block needs the matrix height")
            r %= n1
        return r

    def col_index(self, n2: int | None = None) -> np.ndarray:
        c = self.col_start - 1 + np.arange(self.width)
        if self.wrap:
            if n2 is None:
                raise ParameterError("wrapped block needs the matrix width")
            c %= n2
        return c

    def cells(self, shape: tuple[int, int] | None = None) -> list[tuple[int, int]]:
        """All member cells as 1-based ``(i, j)`` pairs."""
        n1, n2 = shape if shape is not None else (None, None)
        return [(int(i) + 1, int(j) + 1)
                for i in self.row_index(n1) for j in self.col_index(n2)]

    def contains(self, i: int, j: int, shape: tuple[int, int] | None = None) -> bool:
        di = i - self.row_start
        dj = j - self.col_start
        if self.wrap:
            if shape is None:
                raise ParameterError("wrapped block needs the matrix shape")
            di %= shape[0]
            dj %= shape[1]
        return 0 <= di < self.height and 0 <= dj < self.width

    def mask(self, n1: int, n2: int) -> np.ndarray:
        m = np.zeros((n1, n2), dtype=bool)
        m[np.ix_(self.row_index(n1), self.col_index(n2))] = True
        return m

    def contains_block(self, other: "Block", shape: tuple[int, int]) -> bool:
        rows = set(self.row_index(shape[0]).tolist())
        cols = set(self.col_index(shape[1]).tolist())
        return set(other.row_index(shape[0]).tolist()) <= rows and \
            set(other.col_index(shape[1]).tolist()) <= cols

    def transpose(self) -> "Block":
        return Block(self.col_start, self.row_start, self.width, self.height, self.wrap)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.row_start, self.col_start, self.height, self.width)


@dataclass(frozen=True)
class BlockFamily:
    """Ordered, immutable sequence of blocks."""

    blocks: tuple[Block, ...]
    shape: tuple[int, int]

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(self.blocks)

    def __getitem__(self, idx):
        return self.blocks[idx]


def enumerate_blocks(n1: int, n2: int, k1: int, k2: int) -> BlockFamily:
    """All contiguous, non-wrapping ``k1 x k2`` blocks in row-major order."""
    check_dims(n1, n2, k1, k2)
    blocks = tuple(Block(r, c, k1, k2)
                   for r in range(1, n1 - k1 + 2)
                   for c in range(1, n2 - k2 + 2))
    return BlockFamily(blocks, (n1, n2))


@dataclass(frozen=True)
class SignalInstance:
    """Ground truth: a zero matrix with a constant ``mu`` on ``b_star``."""

    n1: int
    n2: int
    k1: int
    k2: int
    mu: float
    sigma: float
    b_star: Block

    def __post_init__(self):
        check_dims(self.n1, self.n2, self.k1, self.k2)
        if not self.mu >= 0:
            raise ParameterError(f"mu must be nonnegative, got {self.mu}")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        b = self.b_star
        if b.wrap or (b.height, b.width) != (self.k1, self.k2) or not b.fits(self.n1, self.n2):
            raise ParameterError(f"b_star {b} is not a contiguous {self.k1}x{self.k2} "
                                 f"block of a {self.n1}x{self.n2} matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    def matrix(self) -> np.ndarray:
        return self.mu * self.b_star.mask(self.n1, self.n2).astype(float)

    def transpose(self) -> "SignalInstance":
        return SignalInstance(self.n2, self.n1, self.k2, self.k1, self.mu, self.sigma,
                              self.b_star.transpose())

    def with_params(self, **kw) -> "SignalInstance":
        return replace(self, **kw)


def sample_instance(n1: int, n2: int, k1: int, k2: int, mu: float, sigma: float,
                    rng: np.random.Generator) -> SignalInstance:
    """Draw ``b_star`` uniformly from the contiguous family."""
    check_dims(n1, n2, k1, k2)
    r = int(rng.integers(1, n1 - k1 + 2))
    c = int(rng.integers(1, n2 - k2 + 2))
    return SignalInstance(n1, n2, k1, k2, float(mu), float(sigma), Block(r, c, k1, k2))


def signal_value(instance: SignalInstance, i: int, j: int) -> float:
    if not (1 <= i <= instance.n1 and 1 <= j <= instance.n2):
        raise IndexError(f"({i}, {j}) outside {instance.n1}x{instance.n2}")
    return instance.mu if instance.b_star.contains(i, j) else 0.0


# Phase tags used when deriving sub-streams for one trial.
STREAM_INSTANCE = 0
STREAM_NOISE = 1
STREAM_SENSING = 2


@dataclass(frozen=True)
class RngHandle:
    """Seed plus a stream label; turns into an independent Philox generator.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys,
    so ``RngHandle(seed, (trial, phase))`` gives the same draws no matter
    which worker or in which order it is evaluated.
    """

    seed: int
    stream: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    def child(self, *keys: int) -> "RngHandle":
        return RngHandle(self.seed, self.stream + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngHandle):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))
