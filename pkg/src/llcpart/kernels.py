"""Selects the compiled search kernel when available, else the Python one.

Set ``LLCPART_PURE=1`` to force the pure-Python implementation.
"""
import os

from . import _search_py

BACKEND = "python"
search_compositions = _search_py.search_compositions

if os.environ.get("LLCPART_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._search_ext import search_compositions  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

FAIRNESS = _search_py.FAIRNESS
THROUGHPUT = _search_py.THROUGHPUT


def backends() -> dict:
    """Every importable implementation, keyed by name (for benchmarks/tests)."""
    out = {"python": _search_py.search_compositions}
    try:
        from ._search_ext import search_compositions as ext
        out["cython"] = ext
    except ImportError:
        pass
    return out
