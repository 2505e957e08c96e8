import itertools

import numpy as np
import pytest

from histrack import autodiff as ad
from histrack.embedding import (
    MASK,
    EmbeddingParams,
    HistoricalTrajectory,
    build_embedding,
    pe_spat,
    pe_spat_array,
    pe_temp,
    serial_numbers,
    spatial_frequencies,
)
from histrack.geometry import BBox


@pytest.fixture
def params():
    return EmbeddingParams.init(16, np.random.default_rng(0))


def test_pe_spat_zero_box_alternates():
    for D in (8, 16, 64):
        v = pe_spat(BBox(0, 0, 0, 0), D)
        assert np.array_equal(v[0::2], np.zeros(D // 2))
        assert np.array_equal(v[1::2], np.ones(D // 2))


def test_pe_spat_first_block_scalar_oracle():
    D, s = 16, 100.0
    v = pe_spat(BBox(0.5, 0, 0, 0), D, scale=s)
    block = D // 4
    expected = []
    for i in range(block // 2):
        w = 10000.0 ** (-2.0 * i / block)
        expected += [np.sin(0.5 * s * w), np.cos(0.5 * s * w)]
    assert np.allclose(v[:block], expected, rtol=0, atol=1e-15)
    # the other three coordinates are zero, so their blocks are the sin 0 / cos 0 pattern
    assert np.array_equal(v[block:], pe_spat(BBox(0, 0, 0, 0), D)[block:])


def test_pe_spat_block_order_follows_coordinates():
    D = 32
    b = BBox(0.1, 0.2, 0.3, 0.4)
    v = pe_spat(b, D).reshape(4, D // 4)
    for k, coord in enumerate(b):
        assert np.array_equal(v[k], pe_spat(BBox(coord, 0, 0, 0), D)[: D // 4])


def test_pe_spat_rejects_bad_dimension():
    with pytest.raises(ValueError):
        pe_spat(BBox(0, 0, 0, 0), 12)


def test_pe_spat_injective_on_grid():
    g = np.linspace(0.0, 1.0, 10)
    grid = np.array(list(itertools.product(g, g, g, g)))  # 10^4 boxes
    codes = pe_spat_array(grid, 16)
    assert len(np.unique(codes.round(12), axis=0)) == len(grid)


def test_pe_temp_scalar_oracle():
    D = 8
    v = pe_temp(1, D)
    for i in range(D // 2):
        assert v[2 * i] == pytest.approx(np.sin(1 / 10000 ** (2 * i / D)), abs=1e-15)
        assert v[2 * i + 1] == pytest.approx(np.cos(1 / 10000 ** (2 * i / D)), abs=1e-15)


def test_pe_temp_distinct_and_ranged():
    T, D = 30, 64
    codes = [pe_temp(k, D, T + 1) for k in range(1, T + 2)]
    for a, b in itertools.combinations(codes, 2):
        assert not np.array_equal(a, b)
    assert np.array_equal(pe_temp(5, D), pe_temp(5, D))
    with pytest.raises(ValueError):
        pe_temp(0, D)
    with pytest.raises(ValueError):
        pe_temp(T + 2, D, T + 1)


def test_serial_numbers_run_backwards():
    assert serial_numbers(4).tolist() == [5, 4, 3, 2, 1]


def test_build_embedding_rows(params):
    T, D = 4, 16
    b = BBox(0, 0, 0, 0)
    h = HistoricalTrajectory((b,) * T)
    z, x = build_embedding(h, params)
    assert z.shape == x.shape == (T + 1, D)
    for i in range(1, T):
        assert np.array_equal(x.data[0], x.data[i])
    for i, j in itertools.combinations(range(T + 1), 2):
        assert not np.array_equal(z.data[i], z.data[j])
    assert np.array_equal(x.data[T], params.prediction_token.data)
    for i, k in enumerate(serial_numbers(T)):
        assert np.allclose(z.data[i] - x.data[i], pe_temp(int(k), D), atol=1e-15)


def test_newborn_is_left_padded(params):
    T = 6
    b = BBox(0.4, 0.6, 0.1, 0.2)
    h = HistoricalTrajectory.newborn(b, T)
    assert h.slots[:-1] == (MASK,) * (T - 1)
    _, x = build_embedding(h, params)
    for i in range(T - 1):
        assert np.array_equal(x.data[i], params.mask_token.data)
    assert np.allclose(x.data[T - 1], pe_spat(b, 16), atol=0)


def test_recency_anchoring_independent_of_padding(params):
    T = 5
    b = BBox(0.3, 0.3, 0.1, 0.1)
    for n in range(1, T + 1):
        h = HistoricalTrajectory.from_boxes([b] * n, T)
        z, x = build_embedding(h, params)
        assert np.allclose(z.data[T] - x.data[T], pe_temp(1, 16), rtol=0, atol=1e-15)
        assert np.allclose(z.data[T - 1] - x.data[T - 1], pe_temp(2, 16), rtol=0, atol=1e-15)


def test_mask_rows_ignore_underlying_box(params):
    from histrack.embedding import build_embedding_batch

    rng = np.random.default_rng(3)
    boxes = rng.random((2, 5, 4))
    mask = np.array([[True, False, True, False, False]] * 2)
    other = boxes.copy()
    other[:, [0, 2]] = rng.random((2, 2, 4))
    z1, _ = build_embedding_batch(boxes, mask, params)
    z2, _ = build_embedding_batch(other, mask, params)
    assert np.array_equal(z1.data, z2.data)


def test_all_mask_rejected(params):
    with pytest.raises(ValueError):
        build_embedding(HistoricalTrajectory((MASK,) * 3), params)


def test_tokens_receive_gradient(params):
    h = HistoricalTrajectory((MASK, BBox(0.2, 0.2, 0.1, 0.1), MASK, BBox(0.3, 0.2, 0.1, 0.1)))
    z, _ = build_embedding(h, params)
    ad.sum_(ad.mul(z, np.random.default_rng(1).normal(size=z.shape))).backward()
    assert np.any(params.prediction_token.grad != 0)
    assert np.any(params.mask_token.grad != 0)


def test_trajectory_push_and_helpers():
    a, b = BBox(0.1, 0.1, 0.1, 0.1), BBox(0.2, 0.2, 0.1, 0.1)
    h = HistoricalTrajectory.newborn(a, 3).push(b)
    assert h.slots == (MASK, a, b)
    assert h.n_boxes() == 2 and h.last_box() == b and h.T == 3
    assert h.push(MASK).last_box() == b
    assert np.array_equal(spatial_frequencies(16), 10000.0 ** (-2.0 * np.arange(2) / 4))
