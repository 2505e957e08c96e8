"""JIT switch for the hot kernels.

Kernels are compiled with numba unless ``HISTRACK_NO_NUMBA`` is set to a
truthy value (or numba is missing), in which case callers use the
vectorized numpy implementations instead.
"""
import os

_FLAG = os.environ.get("HISTRACK_NO_NUMBA", "").strip().lower()

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator.

    The kernel stays importable (and runs as plain Python) without numba so
    that both paths can be exercised against the same oracles.
    """
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
