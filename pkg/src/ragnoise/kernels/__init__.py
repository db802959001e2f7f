"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the ``RAGNOISE_BACKEND``
environment variable: ``numba`` (default when importable), or ``numpy``.
Integer kernels (n-gram hashing) and the edit-distance / BM25 kernels are
bit-identical across backends; BLAS-backed reductions agree to rounding.
Hold the backend fixed when byte-reproducible run artifacts matter.

``benchmarks/bench_backends.py`` times both implementations side by side.
"""

import os

_requested = os.environ.get("RAGNOISE_BACKEND", "").strip().lower()

if _requested == "numpy":
    from ragnoise.kernels import numpy_impl as _impl
elif _requested == "numba":
    from ragnoise.kernels import numba_impl as _impl
elif _requested in ("", "auto"):
    try:
        from ragnoise.kernels import numba_impl as _impl
    except ImportError:
        from ragnoise.kernels import numpy_impl as _impl
else:
    raise ValueError(f"RAGNOISE_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = _impl.BACKEND
hash_ngram_buckets = _impl.hash_ngram_buckets
project_segments = _impl.project_segments
scatter_outer = _impl.scatter_outer
bm25_accumulate = _impl.bm25_accumulate
edit_distance_scan = _impl.edit_distance_scan


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return BACKEND
