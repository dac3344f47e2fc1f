import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from blocksense import bounds
from blocksense.bounds import BoundQuery, DegenerateBound, evaluate, log_binom
from blocksense.core import ParameterError


def q(n=64, k=4, m=100, sigma=1.0, alpha=0.05):
    return BoundQuery(n, n, k, k, m, sigma, alpha)


def test_detection_lb_spot():
    assert abs(bounds.detection_lb(q(alpha=0.5)) - 0.75) <= 1e-12


def test_spot_values_against_hand_formulas():
    L = math.log
    cases = {
        "det-ub": (q(k=8), math.sqrt(8 * 64 * 64 * L(20) / (100 * 8 ** 4))),
        "ploc-lb": (q(), math.sqrt(64 * 64 / 100 * max(1 / 4, L(60) / 16))),
        "ploc-ub": (q(), math.sqrt(64 * 64 / 100 * L(40) * max(L(4) / 4, L(60) / 16))),
        "aloc-lb": (q(), 0.95 * max(math.sqrt(2 * 60 * 28 / (100 * 256)), math.sqrt(8 / 400))),
        "aloc-ub": (q(m=500, alpha=0.1),
                    max(math.sqrt(352 * 4096 * L(41) / (500 * 256)),
                        math.sqrt(1408 * L(4) * L(24 * L(4) / 0.1) / 2000))),
        "bic-ub": (q(), math.sqrt(64 * 64 / 100 * L(40) * L(3600) / 8)),
    }
    for which, (query, expect) in cases.items():
        assert evaluate(which, query) == pytest.approx(expect, rel=1e-12), which
    assert evaluate("det-ub", q(k=8)) == pytest.approx(0.48955, abs=1e-5)
    assert evaluate("aloc-ub", q(m=500, alpha=0.1)) == pytest.approx(6.46759, abs=1e-5)


def test_bicluster_lb_hand_formula():
    n, k, m = 64, 4, 100
    comb = 2 * math.log(math.comb(n - k, k))
    expect = math.sqrt(n * n / m * max(math.log(n - k) / k, comb / (k * k)))
    assert bounds.bicluster_passive_lb(q()) == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("which", sorted(bounds.BOUNDS))
def test_sigma_and_m_scaling(which):
    base = evaluate(which, q(k=3))
    assert evaluate(which, q(k=3, sigma=2.5)) == pytest.approx(2.5 * base, rel=1e-12)
    assert evaluate(which, q(k=3, m=400)) == pytest.approx(base / 2, rel=1e-12)


@pytest.mark.parametrize("which", sorted(bounds.BOUNDS))
def test_symmetric_under_swap(which):
    a = BoundQuery(64, 32, 4, 2, 100)
    b = BoundQuery(32, 64, 2, 4, 100)
    assert evaluate(which, a) == pytest.approx(evaluate(which, b), rel=1e-12)


def test_alpha_one_limits():
    assert bounds.detection_lb(q(alpha=1.0)) == 0.0
    assert bounds.active_loc_lb(q(alpha=1.0)) == 0.0
    assert bounds.detection_ub(q(alpha=1.0)) == 0.0
    assert bounds.detection_lb(q(alpha=0.999)) < 1e-2


def test_degenerate_detection_lb():
    with pytest.warns(DegenerateBound):
        assert math.isinf(bounds.detection_lb(BoundQuery(8, 8, 8, 8, 10)))


def test_active_lb_branch_dropped():
    with pytest.warns(DegenerateBound):
        v = bounds.active_loc_lb(BoundQuery(8, 8, 6, 6, 10))
    assert v == pytest.approx(0.95 * math.sqrt(8 / 60))


def test_active_ub_k_one_uses_approx_branch():
    v = bounds.active_loc_ub(BoundQuery(64, 64, 1, 1, 100, alpha=0.1))
    assert v == pytest.approx(math.sqrt(352 * 4096 * math.log(41) / 100))


def test_passive_lb_branch_switch():
    n = 64

    def gap(k):
        return 1 / k - math.log(n - k) / k ** 2

    k_star = brentq(gap, 1.5, 20)
    assert abs(k_star - math.log(n - k_star)) < 1e-9
    for k in (k_star - 0.3, k_star + 0.3):
        qq = BoundQuery(n, n, k, k, 100)
        first = math.sqrt(n * n / 100 / k)
        second = math.sqrt(n * n / 100 * math.log(n - k) / k ** 2)
        assert bounds.passive_loc_lb(qq) == pytest.approx(max(first, second))
    assert math.log(n - (k_star - 0.3)) / (k_star - 0.3) > 1
    assert math.log(n - (k_star + 0.3)) / (k_star + 0.3) < 1


@given(st.integers(0, 30), st.integers(0, 30))
def test_log_binom_exact(n, k):
    if k > n:
        assert log_binom(n, k) == -math.inf
    else:
        assert log_binom(n, k) == pytest.approx(math.log(math.comb(n, k)), abs=1e-10)


def test_detection_ratio_bounded():
    ratios = []
    for n in (16, 32, 64, 128, 256):
        for k in range(2, n // 2 + 1, max(1, n // 16)):
            for m in (10, 100, 1000, 10_000):
                qq = q(n=n, k=k, m=m)
                ratios.append(bounds.detection_ub(qq) / bounds.detection_lb(qq))
    ratios = np.array(ratios)
    assert (ratios >= 1).all()
    # ratio = sqrt(n^2 / (2 (n-k)^2) log(1/alpha)) / (1-alpha): no m dependence, bounded in n, k
    assert ratios.max() / ratios.min() <= 2 + 1e-9


def test_passive_min_m():
    assert bounds.passive_loc_min_m(q(), C1=2.0) == pytest.approx(2 * math.log(60))


def test_query_validation():
    with pytest.raises(ParameterError):
        BoundQuery(8, 8, 9, 2, 10)
    with pytest.raises(ParameterError):
        BoundQuery(8, 8, 2, 2, 0)
    with pytest.raises(ParameterError):
        q(alpha=0.0)
    with pytest.raises(ParameterError):
        evaluate("nope", q())
    assert q(alpha=0.2).delta == 0.2


def test_constant_passthrough():
    assert evaluate("ploc-ub", q(), C=3.0) == pytest.approx(3 * evaluate("ploc-ub", q()))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        evaluate("aloc-lb", q())
