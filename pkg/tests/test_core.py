import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blocksense.core import (Block, ParameterError, RngHandle, SignalInstance,
                             enumerate_blocks, sample_instance, signal_value)


def test_enumerate_small():
    fam = enumerate_blocks(4, 4, 2, 2)
    assert len(fam) == 9
    assert fam[0].as_tuple() == (1, 1, 2, 2)
    assert fam[-1].as_tuple() == (3, 3, 2, 2)


def test_enumerate_single_block():
    fam = enumerate_blocks(5, 3, 5, 3)
    assert len(fam) == 1
    assert fam[0].as_tuple() == (1, 1, 5, 3)


def test_enumerate_count_32():
    assert len(enumerate_blocks(32, 32, 4, 4)) == 841


def test_enumerate_row_major():
    fam = enumerate_blocks(5, 6, 2, 3)
    keys = [(b.row_start, b.col_start) for b in fam]
    assert keys == sorted(keys)


@pytest.mark.parametrize("dims", [(4, 4, 5, 1), (4, 4, 0, 2), (3, 3, 1, 4)])
def test_enumerate_rejects_bad_dims(dims):
    with pytest.raises(ParameterError):
        enumerate_blocks(*dims)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.data())
def test_block_cells_match_contains(n1, n2, data):
    h = data.draw(st.integers(1, n1))
    w = data.draw(st.integers(1, n2))
    wrap = data.draw(st.booleans())
    r = data.draw(st.integers(1, n1 if wrap else n1 - h + 1))
    c = data.draw(st.integers(1, n2 if wrap else n2 - w + 1))
    b = Block(r, c, h, w, wrap)
    shape = (n1, n2)
    cells = set(b.cells(shape))
    assert len(cells) == h * w == b.size
    brute = {(i, j) for i in range(1, n1 + 1) for j in range(1, n2 + 1) if b.contains(i, j, shape)}
    assert cells == brute
    assert b.mask(n1, n2).sum() == h * w


def test_full_family_size_formula():
    for n1, n2, k1, k2 in [(7, 5, 3, 2), (10, 10, 1, 10), (6, 9, 6, 4)]:
        assert len(enumerate_blocks(n1, n2, k1, k2)) == (n1 - k1 + 1) * (n2 - k2 + 1)


def test_instance_validation():
    with pytest.raises(ParameterError):
        SignalInstance(4, 4, 2, 2, 1.0, 0.0, Block(1, 1, 2, 2))
    with pytest.raises(ParameterError):
        SignalInstance(4, 4, 2, 2, -1.0, 1.0, Block(1, 1, 2, 2))
    with pytest.raises(ParameterError):
        SignalInstance(4, 4, 2, 2, 1.0, 1.0, Block(4, 1, 2, 2))
    with pytest.raises(ParameterError):
        SignalInstance(4, 4, 2, 2, 1.0, 1.0, Block(1, 1, 2, 2, wrap=True))


def test_uniform_prior():
    n = 100_000
    g = np.random.default_rng(7)
    counts = Counter(sample_instance(4, 4, 2, 2, 1.0, 1.0, g).b_star for _ in range(n))
    assert len(counts) == 9
    tol = 4 * math.sqrt((1 / 9) * (8 / 9) / n)
    for freq in counts.values():
        assert abs(freq / n - 1 / 9) <= tol


def test_sample_single_block():
    inst = sample_instance(3, 5, 3, 5, 2.0, 1.0, np.random.default_rng(0))
    assert inst.b_star == Block(1, 1, 3, 5)


def test_same_stream_same_draw():
    h = RngHandle(99, (3, 1))
    a = sample_instance(20, 20, 3, 3, 1.0, 1.0, h.generator())
    b = sample_instance(20, 20, 3, 3, 1.0, 1.0, h.generator())
    assert a == b


def test_distinct_streams_differ():
    a = RngHandle(5, (0,)).generator().standard_normal(8)
    b = RngHandle(5, (1,)).generator().standard_normal(8)
    assert not np.allclose(a, b)


def test_signal_value():
    inst = SignalInstance(6, 6, 2, 3, 1.5, 1.0, Block(2, 3, 2, 3))
    assert signal_value(inst, 2, 3) == 1.5
    assert signal_value(inst, 3, 5) == 1.5
    assert signal_value(inst, 1, 3) == 0.0
    assert signal_value(inst, 2, 6) == 0.0
    with pytest.raises(IndexError):
        signal_value(inst, 7, 1)
    null = inst.with_params(mu=0.0)
    assert not null.matrix().any()


def test_matrix_matches_signal_value():
    inst = SignalInstance(5, 7, 2, 3, 0.7, 1.0, Block(3, 4, 2, 3))
    A = inst.matrix()
    for i in range(1, 6):
        for j in range(1, 8):
            assert A[i - 1, j - 1] == signal_value(inst, i, j)


def test_transpose_roundtrip():
    inst = SignalInstance(5, 7, 2, 3, 0.7, 1.0, Block(3, 4, 2, 3))
    assert inst.transpose().transpose() == inst
    assert np.array_equal(inst.transpose().matrix(), inst.matrix().T)
