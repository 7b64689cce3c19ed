"""Backend selection for the hot trajectory kernels.

Numba is used when importable unless ``OPTOSIM_DISABLE_NUMBA`` is set to a
truthy value, in which case every kernel runs through its vectorised numpy
twin.  The flag is read once at import time.
"""

import logging
import os

log = logging.getLogger(__name__)

_FALSEY = ("", "0", "false", "no", "off")

DISABLE_NUMBA = os.environ.get("OPTOSIM_DISABLE_NUMBA", "0").strip().lower() not in _FALSEY

try:
    if DISABLE_NUMBA:
        raise ImportError("numba disabled by OPTOSIM_DISABLE_NUMBA")
    import numba
    from numba import njit, prange

    # the bundled TBB is too old for numba and only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(f):
            return f

        return wrap


def backend_name():
    return "numba" if HAVE_NUMBA else "numpy"


def set_threads(n):
    """Set the numba worker count; a no-op on the numpy backend."""
    if not HAVE_NUMBA or n is None:
        return
    n = int(n)
    if n < 1:
        raise ValueError("thread count must be >= 1")
    cap = numba.config.NUMBA_NUM_THREADS
    if n > cap:
        log.warning("requested %d threads but the numba pool holds %d; set NUMBA_NUM_THREADS "
                    "before start-up to raise it", n, cap)
    numba.set_num_threads(min(n, cap))


def get_threads():
    if not HAVE_NUMBA:
        return 1
    return numba.get_num_threads()
