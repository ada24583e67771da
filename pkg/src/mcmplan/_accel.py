"""Numba switch.

Set ``MCMPLAN_NUMBA=0`` to force the pure-numpy code paths. When numba is
missing the numpy paths are used regardless.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

if numba is not None and "NUMBA_THREADING_LAYER" not in os.environ:
    # skip probing an old system TBB first; results never depend on the layer
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

USE_NUMBA = numba is not None and os.environ.get("MCMPLAN_NUMBA", "1") not in ("0", "false", "off")

njit_opts = {"cache": True, "nogil": True, "error_model": "numpy"}


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    opts = dict(njit_opts, **kwargs)
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **opts)


prange = range if numba is None else numba.prange


def resolve_backend(backend=None):
    """Map ``None``/"auto"/"numba"/"numpy" to the backend actually used."""
    if backend in (None, "auto"):
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and numba is None:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
