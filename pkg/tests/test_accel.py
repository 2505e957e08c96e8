import os
import subprocess
import sys

import numpy as np
import pytest

from histrack import association, geometry
from histrack._accel import HAVE_NUMBA


def _backend_in_subprocess(flag):
    env = dict(os.environ)
    env.pop("HISTRACK_NO_NUMBA", None)
    if flag is not None:
        env["HISTRACK_NO_NUMBA"] = flag
    out = subprocess.run([sys.executable, "-c", "import histrack; print(histrack.backend())"], env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_numpy():
    assert _backend_in_subprocess("1") == "numpy"
    assert _backend_in_subprocess("0") == ("numba" if HAVE_NUMBA else "numpy")


def test_iou_kernels_agree(rng):
    a = rng.random((40, 4)) * [1, 1, 0.3, 0.3] + [0, 0, 0.01, 0.01]
    b = rng.random((25, 4)) * [1, 1, 0.3, 0.3] + [0, 0, 0.01, 0.01]
    assert np.allclose(geometry._iou_matrix_jit(a, b), geometry._iou_matrix_np(a, b), atol=1e-15)


@pytest.mark.parametrize("n", [1, 5, 30])
def test_hungarian_kernels_agree(rng, n):
    c = rng.random((n, n))
    a = association.solve_square(c, True)
    b = association.solve_square(c, False)
    assert sorted(a) == list(range(n)) and sorted(b) == list(range(n))
    assert c[np.arange(n), a].sum() == pytest.approx(c[np.arange(n), b].sum(), abs=1e-12)
