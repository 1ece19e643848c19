"""Backend selection for the hot numerical kernels.

Two kernels dominate solver runtime: the gram-matrix active-set NNLS that
backs every polyhedral cone projection, and the probability-simplex
projection used by the partial-linearization heuristic. Both exist in two
interchangeable implementations:

* a numba-compiled version (``_nb_impl``), used by default when numba
  imports cleanly;
* a pure-numpy version (``_np_impl``) with the same pivot selection and
  tolerance logic.

The environment variable ``CONESV_NUMBA`` picks the path explicitly:
``0``/``off`` forces the numpy fallback, ``1``/``on`` makes a numba import
failure a hard error. Anything else (or unset) means "numba if available".
``benchmarks/bench_kernels.py`` compares the two paths.
"""

import os

__all__ = ["BACKEND", "nnls_gram", "nnls_gram_banded", "project_simplex_kernel"]

_flag = os.environ.get("CONESV_NUMBA", "auto").strip().lower()

if _flag in ("0", "off", "no", "false"):
    _want_numba = False
    _require_numba = False
elif _flag in ("1", "on", "yes", "true"):
    _want_numba = True
    _require_numba = True
else:
    _want_numba = True
    _require_numba = False

BACKEND = "numpy"
if _want_numba:
    try:
        from ._nb_impl import nnls_gram, nnls_gram_banded, project_simplex_kernel

        BACKEND = "numba"
    except ImportError:
        if _require_numba:
            raise
        _want_numba = False

if not _want_numba:
    from ._np_impl import (  # noqa: F401
        nnls_gram,
        nnls_gram_banded,
        project_simplex_kernel,
    )
