"""Optional numba acceleration.

Kernels in :mod:`hedonic_esg.kernels` are written twice: a loop form that numba
compiles, and a vectorized numpy form used when numba is missing or disabled.
Set ``HEDONIC_ESG_DISABLE_JIT=1`` to force the numpy path (read once, at import).
"""
import os

try:
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    _njit = None
    HAS_NUMBA = False

_FLAG = os.environ.get("HEDONIC_ESG_DISABLE_JIT", "").strip().lower()
JIT_DISABLED = _FLAG in ("1", "true", "yes", "on")
USE_JIT = HAS_NUMBA and not JIT_DISABLED


def jit(func=None, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if not HAS_NUMBA:
            return f
        return _njit(**kwargs)(f)

    if func is not None:
        return wrap(func)
    return wrap


def select(jitted, fallback):
    """Return ``jitted`` when acceleration is active, otherwise ``fallback``."""
    return jitted if USE_JIT else fallback
