"""Kernel backend selection.

Hot numeric kernels exist twice: a numba-jitted implementation and a pure
numpy one with identical signatures and results. The active backend is
chosen once at import time:

* ``GRIDWISE_BACKEND=numpy`` forces the numpy path.
* ``GRIDWISE_BACKEND=numba`` forces numba (ImportError if unavailable).
* unset: numba when importable, numpy otherwise.

``GRIDWISE_THREADS`` caps the numba thread pool.
"""

import os

_VALID = ("numba", "numpy")


def _probe_numba() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def select_backend() -> str:
    requested = os.environ.get("GRIDWISE_BACKEND", "").strip().lower()
    if requested and requested not in _VALID:
        raise ValueError(
            f"GRIDWISE_BACKEND must be one of {_VALID}, got {requested!r}"
        )
    if requested == "numpy":
        return "numpy"
    if requested == "numba":
        if not _probe_numba():
            raise ImportError("GRIDWISE_BACKEND=numba but numba is not importable")
        return "numba"
    return "numba" if _probe_numba() else "numpy"


def apply_thread_cap() -> None:
    cap = os.environ.get("GRIDWISE_THREADS", "").strip()
    if not cap:
        return
    n = max(1, int(cap))
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass
