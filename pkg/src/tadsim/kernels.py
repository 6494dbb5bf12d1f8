"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
module is loaded. Both modules expose the same three functions, so tests
and the benchmark import them directly to compare.
"""

from . import _kernels_py

try:
    from . import _kernels as _impl
except ImportError:  # extension not built
    _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

half_counts = _impl.half_counts
weighted = _impl.weighted
update_factor = _impl.update_factor
