"""Backend selection for the Monte Carlo kernel.

The Cython build is used when importable; ``QDL_PURE_PYTHON=1`` forces the
pure-Python implementation. Both consume the same splitmix64 stream per
trial, so they return identical arrays for identical inputs.
"""

import os

from . import _kernel_py

python_simulate = _kernel_py.simulate

try:
    if os.environ.get("QDL_PURE_PYTHON") == "1":
        raise ImportError("pure Python forced")
    from ._kernel import simulate as compiled_simulate
except ImportError:
    compiled_simulate = None

BACKEND = "cython" if compiled_simulate is not None else "python"
simulate = compiled_simulate or python_simulate
