import numpy as np
import pytest

from histrack import autodiff as ad
from histrack import checkpoint
from histrack.embedding import MASK, HistoricalTrajectory, build_embedding
from histrack.geometry import BBox
from histrack.model import EncoderConfig, ModelParams, encode, forward_arrays, head, predict_batch, predict_box

from conftest import numeric_grad, rel_error

CFG = EncoderConfig(n_layers=2, n_heads=2, d_model=16, history_len=6)


@pytest.fixture(scope="module")
def params():
    return ModelParams.init(CFG, seed=0)


def random_history(rng, T=6, n_mask=0):
    start = rng.uniform(0.3, 0.7, 2)
    v = rng.uniform(-0.01, 0.01, 2)
    boxes = [BBox(*(start + k * v), 0.1, 0.12) for k in range(T)]
    return HistoricalTrajectory.from_boxes(boxes[n_mask:], T)


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(d_model=30, n_heads=4)
    with pytest.raises(ValueError):
        EncoderConfig(d_model=12, n_heads=4)  # not a multiple of 8
    c = EncoderConfig(d_model=16, n_heads=2)
    assert c.ffn_dim == 64 and c.head_hidden == 16


def test_encode_shape(params, rng):
    z, x = build_embedding(random_history(rng), params.embedding)
    assert encode(z, x, params, CFG).shape == (7, 16)
    zb = ad.Tensor(rng.normal(size=(3, 7, 16)))
    assert encode(zb, zb, params, CFG).shape == (3, 7, 16)
    with pytest.raises(ad.ShapeError):
        encode(np.zeros((7, 16)), np.zeros((6, 16)), params, CFG)


def test_zero_weights_reduce_to_spatial_injections(rng):
    p = ModelParams.init(CFG, seed=1)
    arrays = {k: (np.zeros_like(v) if k.startswith("enc.") else v) for k, v in p.arrays().items()}
    p = ModelParams.from_arrays(CFG, arrays)
    z, x = rng.normal(size=(7, 16)), rng.normal(size=(7, 16))
    out = encode(z, x, p, CFG, layer_norms=False).data
    assert np.allclose(out, z + CFG.n_layers * x, atol=1e-14)


def test_attention_rows_sum_to_one(params, rng):
    z = rng.normal(size=(2, 7, 16))
    _, attn = encode(z, z, params, CFG, return_attention=True)
    assert len(attn) == CFG.n_layers
    for a in attn:
        assert a.shape == (2, CFG.n_heads, 7, 7)
        assert np.all(np.abs(a.sum(-1) - 1.0) < 1e-12)


def test_predictions_inside_unit_interval(params, rng):
    for n_mask in (0, 3, 5):
        b = predict_box(random_history(rng, n_mask=n_mask), params)
        assert all(0.0 < v < 1.0 for v in b)


def test_zero_head_gives_half(rng):
    p = ModelParams.init(CFG, seed=2)
    arrays = p.arrays()
    arrays["head.2.w"] = np.zeros_like(arrays["head.2.w"])
    arrays["head.2.b"] = np.zeros_like(arrays["head.2.b"])
    p = ModelParams.from_arrays(CFG, arrays)
    assert tuple(predict_box(random_history(rng), p)) == (0.5, 0.5, 0.5, 0.5)


def test_batch_contract(params, rng):
    hs = [random_history(rng, n_mask=k % 4) for k in range(7)]
    assert predict_batch([], params) == []
    full = predict_batch(hs, params)
    assert predict_batch(hs[:1], params)[0] == predict_box(hs[0], params)
    perm = rng.permutation(len(hs))
    permuted = predict_batch([hs[i] for i in perm], params)
    assert permuted == [full[i] for i in perm]
    # per-item independence: an item's result does not depend on its neighbours
    assert predict_batch(hs[2:5], params) == full[2:5]


def test_batch_errors_name_the_item(params, rng):
    hs = [random_history(rng), HistoricalTrajectory((MASK,) * 6)]
    with pytest.raises(ValueError, match="trajectory 1"):
        predict_batch(hs, params)
    with pytest.raises(ValueError, match="trajectory 0"):
        predict_batch([HistoricalTrajectory.newborn(BBox(0.5, 0.5, 0.1, 0.1), 4)], params)


def test_mask_insensitivity(params, rng):
    boxes = rng.uniform(0.2, 0.8, (1, 6, 4))
    mask = np.array([[False, True, False, True, False, False]])
    other = boxes.copy()
    other[0, [1, 3]] = rng.uniform(0.2, 0.8, (2, 4))
    assert np.array_equal(forward_arrays(boxes, mask, params).data, forward_arrays(other, mask, params).data)


def test_head_reads_only_the_prediction_row(params, rng):
    refined = ad.Tensor(rng.normal(size=(7, 16)), requires_grad=True)
    ad.sum_(head(refined[6:7], params)).backward()
    assert np.all(refined.grad[:6] == 0)
    assert np.any(refined.grad[6] != 0)


def test_full_model_gradient_spot_check(rng):
    cfg = EncoderConfig(n_layers=2, n_heads=2, d_model=16, history_len=8)
    p = ModelParams.init(cfg, seed=3)
    boxes = rng.uniform(0.2, 0.8, (3, 8, 4))
    mask = rng.random((3, 8)) < 0.2
    mask[:, -1] = False
    target = rng.uniform(0.2, 0.8, (3, 4))

    def loss():
        return ad.mean(ad.abs_(ad.sub(forward_arrays(boxes, mask, p), target)))

    p.zero_grad()
    loss().backward()
    for name in ("embed.mask_token", "enc.0.attn.wq", "enc.1.norm2.gain", "head.0.b"):
        t = p[name]
        num = numeric_grad(lambda: loss().item(), t.data)
        assert rel_error(t.grad, num) < 1e-4, name


def test_params_checkpoint_round_trip(tmp_path):
    p = ModelParams.init(CFG, seed=4)
    checkpoint.save(tmp_path / "p.ckpt", p.arrays())
    q = ModelParams.from_arrays(CFG, checkpoint.load(tmp_path / "p.ckpt"))
    for k, v in p.arrays().items():
        assert np.array_equal(v, q.arrays()[k])
    bad = dict(p.arrays())
    bad["head.0.w"] = np.zeros((3, 3))
    with pytest.raises(ValueError):
        ModelParams.from_arrays(CFG, bad)
    missing = dict(p.arrays())
    del missing["head.0.w"]
    with pytest.raises((KeyError, ValueError)):
        ModelParams.from_arrays(CFG, missing)


def test_init_is_seed_deterministic():
    a, b = ModelParams.init(CFG, seed=5), ModelParams.init(CFG, seed=5)
    assert all(np.array_equal(a.arrays()[k], b.arrays()[k]) for k in a.arrays())
    assert a.n_parameters() == sum(v.size for v in a.arrays().values())
