"""Passive localization by exhaustive least squares over contiguous blocks.

For each candidate block ``B`` the fit ``y ~ mu_B * z_B`` with
``z_{i,B} = sum_{(a,b) in B} X_i[a, b]`` has the closed form

    mu_hat(B) = <z_B, y> / ||z_B||^2,    f(B) = ||y||^2 - <z_B, y>^2 / ||z_B||^2,

so the whole search reduces to two accumulators per block position.
Block sums for all positions come from a 2D prefix sum, which keeps the
cost at ``O(m n1 n2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (STREAM_INSTANCE, STREAM_NOISE, STREAM_SENSING, Block, ParameterError,
                   RngHandle, SignalInstance, as_generator, check_dims, sample_instance)
from .measure import BudgetLedger, SensingMatrix


def block_sums(x, k1: int, k2: int) -> np.ndarray:
    """Sum of every contiguous ``k1 x k2`` window.

    ``x`` may be a :class:`SensingMatrix`, a 2D array, or a stack of shape
    ``(m, n1, n2)``; the result has shape ``(..., n1 - k1 + 1, n2 - k2 + 1)``.
    """
    if isinstance(x, SensingMatrix):
        x = x.to_dense()
    x = np.asarray(x, dtype=float)
    if x.ndim < 2:
        raise ParameterError("need at least a 2D array")
    n1, n2 = x.shape[-2:]
    check_dims(n1, n2, k1, k2)
    pad = [(0, 0)] * (x.ndim - 2) + [(1, 0), (1, 0)]
    s = np.pad(x, pad).cumsum(axis=-2).cumsum(axis=-1)
    return (s[..., k1:, k2:] - s[..., :-k1, k2:]
            - s[..., k1:, :-k2] + s[..., :-k1, :-k2])


def score(y, z) -> tuple[float, float]:
    """Residual ``f`` and slope ``mu_hat`` of the one-parameter fit ``y ~ mu z``."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if y.shape != z.shape:
        raise ParameterError(f"length mismatch: {y.shape} vs {z.shape}")
    yy = float(y @ y)
    zz = float(z @ z)
    if zz == 0.0:
        return yy, 0.0
    zy = float(z @ y)
    return yy - zy * zy / zz, zy / zz


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Accumulators ``S1 = sum_i z_iB y_i`` and ``S2 = sum_i z_iB^2`` on the grid
    of block positions, plus ``||y||^2``."""

    s1: np.ndarray
    s2: np.ndarray
    y_norm2: float
    k1: int
    k2: int

    @classmethod
    def from_measurements(cls, y, z: np.ndarray, k1: int, k2: int) -> "ScoreTable":
        y = np.asarray(y, dtype=float)
        if z.shape[0] != y.shape[0]:
            raise ParameterError("one block-sum grid per measurement expected")
        s1 = np.tensordot(y, z, axes=(0, 0))
        s2 = np.einsum("ipq,ipq->pq", z, z)
        return cls(s1, s2, float(y @ y), k1, k2)

    def merge(self, other: "ScoreTable") -> "ScoreTable":
        return ScoreTable(self.s1 + other.s1, self.s2 + other.s2,
                          self.y_norm2 + other.y_norm2, self.k1, self.k2)

    def f(self) -> np.ndarray:
        """Least-squares residual for every block position."""
        with np.errstate(divide="ignore", invalid="ignore"):
            fit = np.where(self.s2 > 0, self.s1 ** 2 / self.s2, 0.0)
        return self.y_norm2 - fit

    def mu_hat(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.s2 > 0, self.s1 / self.s2, 0.0)

    def value_at(self, block: Block) -> float:
        return float(self.f()[block.row_start - 1, block.col_start - 1])

    def argmin(self) -> Block:
        # flat argmin returns the first minimum in row-major order, i.e. the
        # lexicographically smallest (row_start, col_start) among ties
        f = self.f()
        r, c = np.unravel_index(int(np.argmin(f)), f.shape)
        return Block(int(r) + 1, int(c) + 1, self.k1, self.k2)


def gaussian_stack(n1: int, n2: int, m: int, rng) -> np.ndarray:
    """``m`` independent Gaussian designs, each entry ``N(0, 1/(n1 n2))``."""
    return as_generator(rng).standard_normal((m, n1, n2)) / math.sqrt(n1 * n2)


def localize_passive(instance: SignalInstance, m: int, rng,
                     ledger: BudgetLedger | None = None,
                     return_measurements: bool = False):
    """Draw ``m`` Gaussian designs, measure, and return the best-fitting block.

    ``rng`` may be an :class:`RngHandle` (sensing and noise get separate
    sub-streams) or a single generator (sensing drawn first, then noise).
    """
    if m < 1:
        raise ParameterError("m must be >= 1")
    if ledger is None:
        ledger = BudgetLedger(m)
    if isinstance(rng, RngHandle):
        g_x, g_e = rng.child(STREAM_SENSING).generator(), rng.child(STREAM_NOISE).generator()
    else:
        g_x = g_e = as_generator(rng)
    ledger.spend("passive", m)
    xs = gaussian_stack(instance.n1, instance.n2, m, g_x)
    z = block_sums(xs, instance.k1, instance.k2)
    b = instance.b_star
    y = instance.mu * z[:, b.row_start - 1, b.col_start - 1] + \
        instance.sigma * g_e.standard_normal(m)
    table = ScoreTable.from_measurements(y, z, instance.k1, instance.k2)
    if return_measurements:
        return table.argmin(), table, y, xs
    return table.argmin(), table


def passive_trial(n1: int, n2: int, k1: int, k2: int, mu: float, sigma: float, m: int,
                  handle: RngHandle) -> dict:
    inst = sample_instance(n1, n2, k1, k2, mu, sigma, handle.child(STREAM_INSTANCE).generator())
    est, table = localize_passive(inst, m, handle)
    return {"success": est == inst.b_star, "est": est, "true": inst.b_star,
            "f_star": table.value_at(inst.b_star), "f_best": table.value_at(est)}


def rescaled_passive_snr(n: int, k: int, m: int, snr: float) -> float:
    return math.sqrt(k * m) * snr / n


def passive_snr_threshold_empirical(n: int, k: int, m: int, trials: int, rng: RngHandle,
                                    snr_grid=None, sigma: float = 1.0) -> list[dict]:
    """Exact-recovery frequency over a grid of ``mu / sigma`` values.

    Each row carries the raw SNR and the rescaled abscissa
    ``sqrt(k m) * snr / n`` under which curves for different ``(n, k)``
    line up.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if snr_grid is None:
        snr_grid = np.linspace(0.0, 2.0, 12) * n / math.sqrt(k * m)
    rows = []
    for i, snr in enumerate(snr_grid):
        hits = sum(passive_trial(n, n, k, k, snr * sigma, sigma, m, rng.child(i, t))["success"]
                   for t in range(trials))
        p = hits / trials
        rows.append({"snr": float(snr), "snr_rescaled": rescaled_passive_snr(n, k, m, snr),
                     "successes": hits, "trials": trials, "phat": p,
                     "stderr": math.sqrt(p * (1 - p) / trials)})
    return rows
