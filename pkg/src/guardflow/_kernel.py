"""Selects the SAT kernel at import time.

The compiled extension is used when it was built; setting
``GUARDFLOW_PURE=1`` in the environment forces the pure-Python fallback.
"""
import os

from . import _sat_py

BACKEND = "python"
dpll = _sat_py.dpll

if os.environ.get("GUARDFLOW_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _sat_ext
    except ImportError:
        pass
    else:
        dpll = _sat_ext.dpll
        BACKEND = "cython"
