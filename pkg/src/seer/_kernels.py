"""Kernel selection: compiled SplitMix64 core when built, pure Python otherwise.

Set ``SEER_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("SEER_PURE_PYTHON") == "1":
    from . import _splitmix_py as _impl
else:
    try:
        from . import _splitmix as _impl
    except ImportError:
        from . import _splitmix_py as _impl

BACKEND = "cython" if _impl.__name__.endswith("._splitmix") else "python"

mix64 = _impl.mix64
next_u64 = _impl.next_u64
fill_uniform = _impl.fill_uniform
uniform_rows = _impl.uniform_rows

__all__ = ["BACKEND", "mix64", "next_u64", "fill_uniform", "uniform_rows"]
