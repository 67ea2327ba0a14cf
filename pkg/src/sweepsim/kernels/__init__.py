"""Kernel backend selection.

The hot per-cell routines (sensor footprint coverage, grid BFS) exist twice:
a Cython extension (``_speedups``) and a numpy/pure-Python fallback
(``pyref``). The compiled backend is preferred when importable; set
``SWEEPSIM_KERNELS=py`` or ``=cy`` to force one. Both produce bit-identical
results (see tests/test_kernels.py), so backend choice never changes a run.
"""

import os

from . import pyref

_forced = os.environ.get("SWEEPSIM_KERNELS", "").strip().lower()

if _forced == "py":
    _impl = pyref
    BACKEND = "py"
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
        BACKEND = "cy"
    except ImportError:
        if _forced == "cy":
            raise ImportError(
                "SWEEPSIM_KERNELS=cy but the compiled extension is not built; "
                "run `pip install -e . --no-build-isolation`")
        _impl = pyref
        BACKEND = "py"

cover_segment = _impl.cover_segment
bfs_dists = _impl.bfs_dists
bfs_path = _impl.bfs_path

__all__ = ["BACKEND", "cover_segment", "bfs_dists", "bfs_path", "pyref"]
