import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histrack import synth
from histrack.kalman import kf_init, kf_predict, kf_update
from histrack.geometry import BBox, l1_box_distance


def test_linear_example():
    tr = synth.linear_track((0.2, 0.5), (0.01, 0.0), (0.1, 0.1), 20)
    assert tr[9, 0] == pytest.approx(0.3, abs=1e-15) and tr[9, 1] == 0.5


def test_occlusion_window_count():
    g = synth.generate(synth.Scenario(n_objects=2, n_frames=60, occlusion_windows=((1, 40, 49),)))
    missing = [f for f in range(1, 61) if 1 not in g.det_ids[f]]
    assert missing == list(range(40, 50))
    assert all(2 in g.det_ids[f] for f in range(1, 61))


def test_sinusoid_closed_form():
    f = np.arange(1, 101)
    tr = synth.sinusoidal_track(0.5, 0.2, 2 * math.pi / 40, 0.3, 0.4, 0.001, (0.1, 0.1), 100)
    for k in range(100):
        assert abs(tr[k, 0] - (0.5 + 0.2 * math.sin(2 * math.pi / 40 * f[k] + 0.3))) <= 1e-12
        assert abs(tr[k, 1] - (0.4 + 0.001 * f[k])) <= 1e-12


def test_reflect():
    x = np.array([0.5, -0.1, 1.2, 2.3])
    assert np.allclose(synth.reflect(x, 0.0, 1.0), [0.5, 0.1, 0.8, 0.3])


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.sampled_from(["Linear", "Sinusoidal", "DirectionShift", "Crossing", "Sinusoidal,DirectionShift,Crossing"]), st.booleans())
def test_boxes_valid_and_deterministic(seed, kind, shape_shift):
    s = synth.Scenario(n_objects=5, n_frames=80, motion_kind=kind, seed=seed, detection_noise_std=0.003, shape_shift=shape_shift)
    g = synth.generate(s)
    assert len(g.ground_truth) == 5
    for per in g.ground_truth.values():
        assert min(per) == 1 and max(per) == 80
        for b in per.values():
            assert b.w > 0 and b.h > 0 and 0 <= b.cx <= 1 and 0 <= b.cy <= 1
    g2 = synth.generate(s)
    assert g2.ground_truth == g.ground_truth and g2.detections == g.detections


def test_crossing_pair_meets():
    a, b = synth.crossing_pair((0.5, 0.5), (1.0, 0.0), 0.01, 0.0, ((0.1, 0.1), (0.1, 0.1)), 40, 20.0)
    assert np.allclose(a[19, :2], b[19, :2]) and np.allclose(a[19, :2], (0.5, 0.5))
    assert a[0, 0] < b[0, 0] and a[39, 0] > b[39, 0]


def test_direction_shift_defeats_constant_velocity():
    tr = synth.direction_shift_track((0.3, 0.5), (0.008, 0.0), (0.1, 0.1), 40, [25], [math.pi / 2])
    s = kf_init(BBox.from_array(tr[0]))
    errs = {}
    for i in range(1, 40):
        s, pred = kf_predict(s)
        errs[i + 1] = l1_box_distance(pred, BBox.from_array(tr[i]))
        s = kf_update(s, BBox.from_array(tr[i]))
    trailing = np.mean([errs[f] for f in range(15, 25)])
    assert errs[25] >= 5 * trailing


def test_dance_toy_preset():
    s = synth.dance_toy(seed=4)
    assert s.n_objects == 8 and s.n_frames == 600 and len(s.occlusion_windows) == 2
    assert all(e - a + 1 == 8 for _, a, e in s.occlusion_windows)
    assert set(s.kinds) == {"Sinusoidal", "DirectionShift", "Crossing"}


def test_scenario_file_round_trip(tmp_path):
    s = synth.dance_toy(seed=2, n_frames=120)
    p = tmp_path / "s.txt"
    p.write_text(synth.format_scenario(s))
    assert synth.load_scenario(p) == s
    assert synth.parse_scenario("preset = linear-toy\nseed = 3\nn_objects = 2\n") == synth.linear_toy(3, n_objects=2)


@pytest.mark.parametrize(
    "kwargs",
    [dict(motion_kind="Spiral"), dict(n_frames=0), dict(occlusion_windows=((1, 5, 300),)), dict(occlusion_windows=((9, 1, 2),))],
)
def test_invalid_scenarios(kwargs):
    with pytest.raises(ValueError):
        synth.Scenario(**kwargs)
    with pytest.raises(ValueError):
        synth.parse_scenario("colour = red")
