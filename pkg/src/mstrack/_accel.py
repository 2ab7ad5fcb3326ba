"""Switch between numba-compiled kernels and their pure-numpy twins.

``MSTRACK_NUMBA=0`` (or ``false``/``off``) selects the numpy path at import
time; anything else, or an unset variable, uses numba when it imports.
``MSTRACK_THREADS`` caps numba's thread pool.
"""

import os

_FALSY = {"0", "false", "off", "no"}


def _numba_requested():
    return os.environ.get("MSTRACK_NUMBA", "1").strip().lower() not in _FALSY


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency
    _numba = None

USE_NUMBA = _numba is not None and _numba_requested()


def _apply_thread_cap():
    cap = os.environ.get("MSTRACK_THREADS")
    if not cap or _numba is None:
        return
    try:
        n = int(cap)
    except ValueError:
        return
    if n >= 1:
        _numba.set_num_threads(min(n, _numba.config.NUMBA_NUM_THREADS))


_apply_thread_cap()


def njit(fn):
    """Compile ``fn`` with numba if available; otherwise return it as-is.

    Kernels decorated here are only *called* when :data:`USE_NUMBA` is set,
    but they are always compiled-on-demand so tests can compare both paths.
    """
    if _numba is None:
        return fn
    return _numba.njit(cache=True, nogil=True)(fn)


def backend():
    return "numba" if USE_NUMBA else "numpy"
