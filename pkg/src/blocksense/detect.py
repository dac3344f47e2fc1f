"""Passive detection with the all-ones design and a one-sided sum test."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (STREAM_INSTANCE, STREAM_NOISE, ParameterError, RngHandle,
                   SignalInstance, as_generator, sample_instance)
from .measure import BudgetLedger, allones_sensing, measure_many


@dataclass(frozen=True)
class DetectionOutcome:
    statistic: float
    threshold: float

    @property
    def reject(self) -> bool:
        return self.statistic > self.threshold


def detection_threshold(m: int, sigma: float, alpha: float) -> float:
    """Level-``alpha`` cutoff ``sigma * sqrt(2 m log(1/alpha))`` for ``sum(y)``."""
    if m < 1 or not sigma > 0 or not 0 < alpha < 1:
        raise ParameterError(f"need m >= 1, sigma > 0, 0 < alpha < 1 (got {m}, {sigma}, {alpha})")
    return sigma * math.sqrt(2.0 * m * math.log(1.0 / alpha))


def run_detection(instance: SignalInstance, m: int, alpha: float, rng,
                  ledger: BudgetLedger | None = None) -> DetectionOutcome:
    thr = detection_threshold(m, instance.sigma, alpha)
    if ledger is None:
        ledger = BudgetLedger(m)
    x = allones_sensing(instance.n1, instance.n2)
    y = measure_many(instance, x, m, rng, ledger, phase="detection")
    return DetectionOutcome(float(y.sum()), thr)


@dataclass(frozen=True)
class DetectionParams:
    n1: int
    n2: int
    k1: int
    k2: int
    sigma: float
    m: int
    alpha: float = 0.05


def detection_trial(params: DetectionParams, mu: float, handle: RngHandle) -> bool:
    """One run; ``mu == 0`` is a null run. Returns whether H0 was rejected."""
    inst = sample_instance(params.n1, params.n2, params.k1, params.k2, mu, params.sigma,
                           handle.child(STREAM_INSTANCE).generator())
    out = run_detection(inst, params.m, params.alpha, handle.child(STREAM_NOISE).generator())
    return out.reject


def estimate_detection_risk(params: DetectionParams, mu_grid, trials: int,
                            rng: RngHandle) -> list[dict]:
    """Monte Carlo type I / type II errors for each ``mu`` in ``mu_grid``.

    The alternative draws ``B*`` uniformly; for the all-ones design the
    statistic does not depend on the block position, so this equals the
    worst case over blocks.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if 2 * params.k1 > params.n1 or 2 * params.k2 > params.n2:
        warnings.warn("block larger than half the matrix; the sum test's guarantee "
                      "assumes k <= c n for c < 1", stacklevel=2)
    null_handle = rng.child(0)
    type_1 = np.mean([detection_trial(params, 0.0, null_handle.child(t)) for t in range(trials)])
    rows = []
    for i, mu in enumerate(mu_grid):
        alt = rng.child(1, i)
        miss = np.mean([not detection_trial(params, float(mu), alt.child(t))
                        for t in range(trials)])
        stderr = math.sqrt((type_1 * (1 - type_1) + miss * (1 - miss)) / trials)
        rows.append({"mu": float(mu), "type_I": float(type_1), "type_II": float(miss),
                     "risk": float(type_1 + miss), "trials": trials, "stderr": stderr})
    return rows
