"""Kernel backend selection.

The compiled extension is used when importable; set ``MOSCOPE_BACKEND=python``
to force the numpy fallback (``compiled`` makes a missing extension an error).
"""
import os

import numpy as np

from . import _reference

_choice = os.environ.get("MOSCOPE_BACKEND", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise ImportError(f"MOSCOPE_BACKEND must be auto, compiled or python, not {_choice!r}")

_compiled = None
if _choice != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        if _choice == "compiled":
            raise

kernels = _compiled if _compiled is not None else _reference
BACKEND = "compiled" if _compiled is not None else "python"


def available():
    """Names of the backends importable in this environment."""
    return ["python"] + (["compiled"] if _compiled is not None else [])


def get(name):
    if name == "python":
        return _reference
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def c_array(a):
    return np.ascontiguousarray(a, dtype=np.float64)
