"""Hot-loop kernels with a compiled/pure backend switch.

The compiled Cython extension is preferred when it imported cleanly;
setting ``RACCESS_PURE_PYTHON=1`` before import forces the NumPy
reference implementation. Both expose the same ``state_recursion``
contract and are compared by ``benchmarks/bench_kernels.py``.
"""

import os

from . import _reference

if os.environ.get("RACCESS_PURE_PYTHON", "") == "1":
    _impl = _reference
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _reference
        BACKEND = "python"

state_recursion = _impl.state_recursion


def backend_name():
    """Which implementation runs the recursion: "compiled" or "python"."""
    return BACKEND
