"""Optional numba acceleration.

Kernels are written in the numba-compatible subset of Python/numpy.  When
numba is missing, or ``PARETO_FLOW_DISABLE_JIT`` is set to a truthy value,
the decorator below is a no-op and the same source runs under CPython.
"""
import os

DISABLE_ENV = "PARETO_FLOW_DISABLE_JIT"

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _disabled_by_env():
    return os.environ.get(DISABLE_ENV, "").strip().lower() in {"1", "true", "yes", "on"}


JIT_ENABLED = numba is not None and not _disabled_by_env()


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if args and callable(args[0]) and len(args) == 1 and not kwargs:
        fn = args[0]
        if JIT_ENABLED:
            return numba.njit(cache=True)(fn)
        return fn

    def wrap(fn):
        if JIT_ENABLED:
            kwargs.setdefault("cache", True)
            return numba.njit(*args, **kwargs)(fn)
        return fn

    return wrap
