"""Backend selection for the hot loops.

The compiled extension ``_core`` is used when it imports; otherwise the
numpy versions in ``_pycore`` are used.  Setting the environment variable
``INTERPTRACE_PURE_PYTHON=1`` forces the numpy versions.
"""

import os

from . import _pycore

if os.environ.get("INTERPTRACE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pycore
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pycore
        BACKEND = "python"

# numpy's convolve beats the compiled loop here (see benchmarks/bench_core.py)
toeplitz_lower = _pycore.toeplitz_lower
maximal_all = _impl.maximal_all
kfunc_linf = _impl.kfunc_linf

__all__ = ["BACKEND", "toeplitz_lower", "maximal_all", "kfunc_linf"]
