import numpy as np
import pytest

from histrack.optim import AdamState, adam_step, clip_global_norm


def test_zero_gradient_leaves_params_and_moments():
    p = {"w": np.array([1.0, -2.0])}
    s = AdamState.zeros_like(p)
    adam_step(p, {"w": np.zeros(2)}, s, lr=0.1)
    assert np.array_equal(p["w"], [1.0, -2.0])
    assert np.array_equal(s.m["w"], [0, 0]) and np.array_equal(s.v["w"], [0, 0])
    assert s.step == 1


def test_first_step_is_lr_times_sign():
    p = {"w": np.array([0.5, 0.5, 0.5])}
    s = AdamState.zeros_like(p)
    g = np.array([3.0, -0.2, 0.05])
    adam_step(p, {"w": g}, s, lr=1e-3)
    assert np.all(np.abs((0.5 - p["w"]) - 1e-3 * np.sign(g)) < 1e-9)


def _scalar_adam(x, grad, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return x


def test_quadratic_matches_scalar_oracle():
    p = {"x": np.array([1.0])}
    s = AdamState.zeros_like(p)
    for _ in range(100):
        adam_step(p, {"x": 2 * p["x"]}, s, lr=0.1)
    assert abs(p["x"][0]) < 0.05
    assert p["x"][0] == pytest.approx(_scalar_adam(1.0, lambda x: 2 * x, 100, 0.1), abs=1e-12)


def test_clip_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    norm = clip_global_norm(g, 1.0)
    assert norm == pytest.approx(5.0)
    assert np.sqrt(g["a"][0] ** 2 + g["b"][0] ** 2) == pytest.approx(1.0)
    g2 = {"a": np.array([0.3])}
    clip_global_norm(g2, 1.0)
    assert g2["a"][0] == 0.3
