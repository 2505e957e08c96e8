"""Time the numba kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat N]

Both paths are called directly, so the env flag does not matter here.
"""
import argparse
import time

import numpy as np

from histrack import _accel
from histrack.association import _hungarian_square_jit, _hungarian_square_np
from histrack.geometry import _iou_matrix_jit, _iou_matrix_np


def best_of(fn, repeat):
    fn()  # warm-up, includes compilation
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def random_boxes(rng, n):
    return np.column_stack([rng.random((n, 2)), rng.uniform(0.02, 0.2, (n, 2))])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"numba available: {_accel.HAVE_NUMBA}")
    print(f"{'kernel':<22}{'size':>8}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")

    for n in (8, 32, 128):
        c = rng.random((n, n))
        assert np.array_equal(_hungarian_square_jit(c), _hungarian_square_np(c))
        tj = best_of(lambda: _hungarian_square_jit(c), args.repeat)
        tn = best_of(lambda: _hungarian_square_np(c), args.repeat)
        print(f"{'hungarian':<22}{n:>8}{tj * 1e3:>12.3f}{tn * 1e3:>12.3f}{tn / tj:>10.1f}")

    for n in (16, 128, 512):
        a, b = random_boxes(rng, n), random_boxes(rng, n)
        assert np.allclose(_iou_matrix_jit(a, b), _iou_matrix_np(a, b), rtol=0, atol=1e-12)
        tj = best_of(lambda: _iou_matrix_jit(a, b), args.repeat)
        tn = best_of(lambda: _iou_matrix_np(a, b), args.repeat)
        print(f"{'iou_matrix':<22}{n:>8}{tj * 1e3:>12.3f}{tn * 1e3:>12.3f}{tn / tj:>10.1f}")


if __name__ == "__main__":
    main()
