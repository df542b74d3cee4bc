"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time. numba is used when importable
unless ``SKEWLENS_DISABLE_NUMBA`` is set to a truthy value; both backends
expose the same functions and are interchangeable.
"""

import os

from . import _numpy as numpy_backend

_FLAG = os.environ.get("SKEWLENS_DISABLE_NUMBA", "").strip().lower()

try:
    from . import _numba as numba_backend
except ImportError:  # numba missing or broken
    numba_backend = None

USE_NUMBA = numba_backend is not None and _FLAG not in ("1", "true", "yes", "on")
backend = numba_backend if USE_NUMBA else numpy_backend
BACKEND_NAME = "numba" if USE_NUMBA else "numpy"

count_matrix = backend.count_matrix
normalized_entropy_rows = backend.normalized_entropy_rows
objective = backend.objective
swap_objectives = backend.swap_objectives
flip_objectives = backend.flip_objectives
ncc_scores = backend.ncc_scores

__all__ = [
    "BACKEND_NAME",
    "USE_NUMBA",
    "backend",
    "count_matrix",
    "flip_objectives",
    "ncc_scores",
    "normalized_entropy_rows",
    "numba_backend",
    "numpy_backend",
    "objective",
    "swap_objectives",
]
