"""Kernel backend selection.

The hot per-link loops (bounded BFS, random walks, induced-subgraph
construction) exist twice: a compiled Cython core (_ckern) and a pure
numpy fallback (_pure) with identical semantics.  The compiled core is
preferred when importable; set SESAMPLE_KERNELS=pure|compiled to force
a choice (forcing "compiled" raises if the extension is missing).

benchmarks/bench_kernels.py compares the two.
"""

from __future__ import annotations

import os

from . import _pure

_forced = os.environ.get("SESAMPLE_KERNELS", "").strip().lower()

if _forced == "pure":
    _impl = _pure
elif _forced in ("compiled", "cy"):
    from . import _ckern as _impl  # noqa: F401  (ImportError is the contract here)
else:
    try:
        from . import _ckern as _impl
    except ImportError:
        _impl = _pure

csr_bfs = _impl.csr_bfs
walk_visits = _impl.walk_visits
induced_csr = _impl.induced_csr


def backend() -> str:
    """Name of the active kernel backend ("compiled" or "pure")."""
    return _impl.BACKEND
