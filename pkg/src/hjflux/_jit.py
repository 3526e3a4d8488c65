"""Numba switch.

``HJFLUX_NUMBA=0`` selects the pure-numpy kernels; otherwise the compiled
loops are used when numba imports.  Compiled loops release the GIL, so
independent solves can share a thread pool capped by ``HJFLUX_THREADS``.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("HJFLUX_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")



def worker_count() -> int:
    """Worker threads for independent solves: ``HJFLUX_THREADS`` or the CPU count."""
    raw = os.environ.get("HJFLUX_THREADS", "").strip()
    try:
        return max(1, int(raw)) if raw else max(1, os.cpu_count() or 1)
    except ValueError:
        return max(1, os.cpu_count() or 1)


def njit(*args, **kwargs):
    """``numba.njit(cache=True, nogil=True)`` when numba is present, identity otherwise."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)
