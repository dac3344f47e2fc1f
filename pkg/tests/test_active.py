import math

import numpy as np
import pytest

from blocksense.active import (LABELS, Region, approx_localize, build_collections,
                               cbs_allocation, cbs_run, exact_localize_columns,
                               exact_localize_rows, localize_active, min_active_budget,
                               padded_size, region_from_blocks)
from blocksense.core import Block, ParameterError, RngHandle, SignalInstance, sample_instance
from blocksense.measure import BudgetLedger


def noiseless(n1, n2, k1, k2, b, mu=1.0):
    return SignalInstance(n1, n2, k1, k2, mu, 1e-12, b)


def test_collection_sizes():
    colls = build_collections(8, 8, 2, 2)
    assert set(colls) == set(LABELS)
    for c in colls.values():
        assert len(c) == 4
        assert all((b.height, b.width) == (4, 4) for b in c.blocks)


@pytest.mark.parametrize("dims", [(16, 16, 2, 2), (16, 32, 4, 2), (8, 16, 1, 4)])
def test_collections_tile_the_torus(dims):
    n1, n2, k1, k2 = dims
    for c in build_collections(*dims).values():
        assert len(c) == n1 * n2 // (4 * k1 * k2)
        cover = np.zeros((n1, n2), dtype=int)
        for b in c.blocks:
            cover += b.mask(n1, n2)
        assert (cover == 1).all()


def test_collection_shifts():
    colls = build_collections(16, 16, 2, 2)
    assert colls["D1"].blocks[0].as_tuple() == (1, 1, 4, 4)
    assert colls["D2"].blocks[0].as_tuple() == (3, 3, 4, 4)
    assert colls["D3"].blocks[0].as_tuple() == (3, 1, 4, 4)
    assert colls["D4"].blocks[0].as_tuple() == (1, 3, 4, 4)
    assert not any(b.wrap for b in colls["D1"].blocks)


def test_d2_last_block_wraps():
    n, k = 16, 2
    last = build_collections(n, n, k, k)["D2"].blocks[-1]
    assert last.wrap
    rows = sorted(int(r) + 1 for r in last.row_index(n))
    cols = sorted(int(c) + 1 for c in last.col_index(n))
    expect = sorted(list(range(n - k + 1, n + 1)) + list(range(1, k + 1)))
    assert rows == expect and cols == expect


def test_every_block_contained_somewhere():
    n, k = 16, 2
    colls = build_collections(n, n, k, k)
    for r in range(1, n - k + 2):
        for c in range(1, n - k + 2):
            b = Block(r, c, k, k)
            holders = [lab for lab, coll in colls.items()
                       if any(t.contains_block(b, (n, n)) for t in coll.blocks)]
            assert holders, b


def test_overlap_counts_match_masks(rng):
    n1, n2, k1, k2 = 16, 32, 2, 4
    for coll in build_collections(n1, n2, k1, k2).values():
        for _ in range(5):
            b = Block(int(rng.integers(1, n1 - k1 + 2)), int(rng.integers(1, n2 - k2 + 2)), k1, k2)
            bm = b.mask(n1, n2)
            expect = [int((t.mask(n1, n2) & bm).sum()) for t in coll.blocks]
            assert list(coll.overlap_counts(b)) == expect


def test_collections_reject_non_dyadic():
    with pytest.raises(ParameterError):
        build_collections(12, 16, 2, 2)
    with pytest.raises(ParameterError):
        build_collections(24, 16, 2, 2)


def test_padding():
    assert padded_size(64, 4) == 64
    assert padded_size(40, 3) == 48
    assert padded_size(5, 4) == 8


def test_allocation_example():
    ms = cbs_allocation(100, 4)
    assert ms == [25, 25, 19, 13]
    assert sum(ms) == 82


def test_allocation_never_exceeds_budget():
    for s0 in range(1, 21):
        m = np.arange(2 * s0, 10_001, dtype=np.int64)
        s = np.arange(1, s0 + 1, dtype=np.int64)
        total = (((m[:, None] - s0) * s[None, :]) // (2 ** (s[None, :] + 1)) + 1).sum(axis=1)
        assert (total <= m).all(), s0
        assert list(total[[0, -1]]) == [sum(cbs_allocation(int(m[0]), s0)),
                                        sum(cbs_allocation(int(m[-1]), s0))]


def test_cbs_sensing_unit_norm_and_noiseless():
    n, k = 32, 2
    coll = build_collections(n, n, k, k)["D1"]
    for i, tile in enumerate(coll.blocks[::5]):
        b = Block(tile.row_start + 1, tile.col_start + 1, k, k)
        inst = noiseless(n, n, k, k, b)
        tr = []
        led = BudgetLedger(100)
        out = cbs_run(inst, coll, 40, np.random.default_rng(i), led, tr)
        assert out == tile
        assert led.spent == sum(cbs_allocation(40, 6)) == len(tr)
        for rec in tr:
            assert abs(rec.x.frobenius_norm() - 1) <= 1e-12
        assert abs(np.linalg.norm(tr[0].x.to_dense()) - 1) <= 1e-12


def test_cbs_noiseless_many():
    n, k = 64, 4
    colls = build_collections(n, n, k, k)
    g = np.random.default_rng(3)
    for t in range(100):
        coll = colls[LABELS[t % 4]]
        tile = coll.blocks[int(g.integers(len(coll)))]
        rows = tile.row_index(n)
        cols = tile.col_index(n)
        if rows[0] + 2 * k > n or cols[0] + 2 * k > n:
            continue
        b = Block(int(rows[0]) + 1 + int(g.integers(0, k + 1)),
                  int(cols[0]) + 1 + int(g.integers(0, k + 1)), k, k)
        assert cbs_run(noiseless(n, n, k, k, b), coll, 30, g) == tile


def test_cbs_precondition():
    coll = build_collections(32, 32, 2, 2)["D1"]
    inst = noiseless(32, 32, 2, 2, Block(1, 1, 2, 2))
    with pytest.raises(ParameterError):
        cbs_run(inst, coll, 11, np.random.default_rng(0))


def test_approx_noiseless_contains():
    g = np.random.default_rng(5)
    for _ in range(50):
        inst = sample_instance(64, 64, 4, 4, 1.0, 1e-12, g)
        region, winners = approx_localize(inst, 20, g)
        assert region.contains_block(inst.b_star)
        assert region.height <= 32 and region.width <= 32
        assert set(winners) == set(LABELS)


def test_approx_at_sufficient_snr():
    n, k, m, delta, sigma = 64, 4, 60, 0.05, 1.0
    mu = math.sqrt(16 * sigma ** 2 * n * n * math.log(1 / (2 * delta) + 1) / (m * k ** 4))
    trials = 300
    hits = 0
    for t in range(trials):
        h = RngHandle(41, (t,))
        inst = sample_instance(n, n, k, k, mu, sigma, h.child(0).generator())
        region, _ = approx_localize(inst, m, h.child(1).generator())
        hits += region.contains_block(inst.b_star)
        assert region.height <= 8 * k and region.width <= 8 * k
    p = hits / trials
    assert p >= 1 - 4 * delta - 3 * math.sqrt(4 * delta * (1 - 4 * delta) / trials)


def spread_region(n, k, b):
    """Worst-case union: four disjoint 2k-wide intervals, one of them covering ``b``."""
    r0 = (b.row_start - 1) // (2 * k) * 2 * k
    c0 = (b.col_start - 1) // (2 * k) * 2 * k
    if b.row_start - 1 + k > r0 + 2 * k or b.col_start - 1 + k > c0 + 2 * k:
        return None
    rows = sorted({(r0 + j * 4 * k + t) % n + 1 for j in range(4) for t in range(2 * k)})
    cols = sorted({(c0 + j * 4 * k + t) % n + 1 for j in range(4) for t in range(2 * k)})
    return Region((n, n), tuple(rows), tuple(cols))


def test_exact_columns_noiseless():
    n, k = 64, 4
    g = np.random.default_rng(9)
    done = 0
    while done < 100:
        inst = sample_instance(n, n, k, k, 1.0, 1e-12, g)
        region = spread_region(n, k, inst.b_star)
        if region is None:
            continue
        assert region.width == 8 * k
        cols = exact_localize_columns(inst, region, 50, 0.05 / 8, g)
        assert cols == tuple(range(inst.b_star.col_start, inst.b_star.col_start + k))
        done += 1


def test_exact_columns_k_one():
    inst = noiseless(16, 16, 2, 1, Block(5, 7, 2, 1))
    region = region_from_blocks([Block(5, 5, 4, 2), Block(3, 7, 4, 2)], (16, 16))
    led = BudgetLedger(1000)
    cols = exact_localize_columns(inst, region, 30, 0.05, np.random.default_rng(0), led)
    assert cols == (7,)
    assert "search" not in led.spent_per_phase


def compact_region(n, k, b):
    """Single ``2k x 2k`` window holding ``b``, the tightest region a run can return."""
    r0 = min(b.row_start - 1, n - 2 * k)
    c0 = min(b.col_start - 1, n - 2 * k)
    return Region((n, n), tuple(range(r0 + 1, r0 + 2 * k + 1)),
                  tuple(range(c0 + 1, c0 + 2 * k + 1)))


def column_hit_rate(make_region, trials=300):
    n, k, m, delta, sigma = 64, 4, 200, 0.05, 1.0
    mu = math.sqrt(32 * sigma ** 2 * math.log(k) / (m * k) * math.log(3 * math.log(k) / delta))
    hits = 0
    for t in range(trials):
        g = RngHandle(77, (t,)).generator()
        inst = sample_instance(n, n, k, k, mu, sigma, g)
        region = make_region(n, k, inst.b_star)
        if region is None:
            inst = inst.with_params(b_star=Block(1 + 8 * int(g.integers(8)), 2, k, k))
            region = make_region(n, k, inst.b_star)
        cols = exact_localize_columns(inst, region, m, delta, g)
        hits += cols[0] == inst.b_star.col_start
    tol = 3 * math.sqrt(2 * delta * (1 - 2 * delta) / trials)
    return hits / trials, 1 - 2 * delta - tol


def test_exact_columns_at_sufficient_snr():
    p, need = column_hit_rate(compact_region)
    assert p >= need


@pytest.mark.xfail(strict=True, reason="with 8k1 region rows the active-probe mean "
                   "sqrt(4/3 m_b L) sits below the threshold sqrt(2 m_b L)")
def test_exact_columns_at_sufficient_snr_widest_region():
    p, need = column_hit_rate(spread_region)
    assert p >= need


def test_rows_are_transposed_columns():
    for t in range(20):
        g = RngHandle(5, (t,))
        inst = sample_instance(32, 64, 2, 4, 0.6, 1.0, g.child(0).generator())
        region, _ = approx_localize(inst, 40, g.child(1).generator())
        a = exact_localize_rows(inst, region, 40, 0.05, g.child(2).generator())
        b = exact_localize_columns(inst.transpose(), region.transpose(), 40, 0.05,
                                   g.child(2).generator())
        assert a == b


def test_localize_noiseless_exact():
    n, k = 64, 4
    budget = 22 * math.ceil(3 * math.log(n * n))
    for t in range(100):
        h = RngHandle(8, (t,))
        inst = sample_instance(n, n, k, k, 1.0, 1e-12, h.child(0).generator())
        assert localize_active(inst, budget, 0.05 / 8, h.child(1)).block == inst.b_star


def test_transpose_invariance_noiseless():
    for t in range(30):
        h = RngHandle(12, (t,))
        inst = sample_instance(64, 32, 4, 2, 1.0, 1e-12, h.child(0).generator())
        a = localize_active(inst, 22 * 40, 0.05 / 8, h.child(1)).block
        b = localize_active(inst.transpose(), 22 * 40, 0.05 / 8, h.child(1)).block
        assert a.transpose() == b == inst.b_star.transpose()


@pytest.mark.parametrize("dims", [(40, 24, 3, 3), (50, 50, 1, 1), (48, 20, 1, 3), (30, 30, 8, 4)])
def test_padding_and_degenerate_sizes(dims):
    n1, n2, k1, k2 = dims
    budget = math.ceil(min_active_budget(n1, n2, k1, k2))
    for t in range(20):
        h = RngHandle(21, (t,))
        inst = sample_instance(n1, n2, k1, k2, 1.0, 1e-12, h.child(0).generator())
        res = localize_active(inst, budget, 0.05 / 8, h.child(1), record=True)
        assert res.block == inst.b_star
        for rec in res.transcript:
            assert rec.x.frobenius_norm() <= 1 + 1e-12


def test_box_variant_noiseless():
    for t in range(20):
        h = RngHandle(13, (t,))
        inst = sample_instance(64, 64, 4, 4, 1.0, 1e-12, h.child(0).generator())
        assert localize_active(inst, 22 * 200, 0.05 / 8, h.child(1), variant="box").block == inst.b_star


def test_budget_schedule():
    m = 100
    inst = SignalInstance(64, 64, 4, 4, 0.3, 1.0, Block(10, 20, 4, 4))
    res = localize_active(inst, 22 * m + 7, 0.05, np.random.default_rng(0), record=True)
    led = res.ledger
    assert res.m_unit == m
    assert led.caps == {"cbs": 4 * m, "stage1": 16 * m, "search": 2 * m}
    assert led.spent_per_phase["cbs"] == 4 * sum(cbs_allocation(m, 6))
    assert all(led.spent_per_phase[p] <= cap for p, cap in led.caps.items())
    assert led.spent == len(res.transcript) <= 22 * m + 7


def test_insufficient_budget():
    inst = SignalInstance(64, 64, 4, 4, 1.0, 1.0, Block(1, 1, 4, 4))
    with pytest.raises(ParameterError):
        localize_active(inst, 22 * 24, 0.05, np.random.default_rng(0))


def test_replay_is_deterministic():
    inst = SignalInstance(64, 64, 4, 4, 0.4, 1.0, Block(30, 7, 4, 4))
    a = localize_active(inst, 22 * 60, 0.05, RngHandle(3), record=True)
    b = localize_active(inst, 22 * 60, 0.05, RngHandle(3), record=True)
    assert [(r.y, r.phase_tag, r.x.describe()) for r in a.transcript] == \
        [(r.y, r.phase_tag, r.x.describe()) for r in b.transcript]
    assert a.block == b.block
