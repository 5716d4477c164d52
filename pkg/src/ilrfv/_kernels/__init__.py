"""Kernel backend selection.

The compiled Cython core is used when available; otherwise the numpy
lockstep fallback.  ``ILRFV_BACKEND=python|cython`` forces a choice, and
``ILRFV_WORKERS`` splits batches into that many fixed-order chunks (the
per-cell work is independent, so results are identical for any count).
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

_choice = os.environ.get("ILRFV_BACKEND", "").strip().lower()
if _choice in ("", "auto", "cython"):
    try:
        from . import _core as _impl
    except ImportError:
        if _choice == "cython":
            raise
        _impl = _fallback
elif _choice == "python":
    _impl = _fallback
else:
    raise ValueError(
        f"ILRFV_BACKEND={_choice!r} not recognised (use 'cython' or 'python')"
    )

BACKEND = _impl.BACKEND_NAME


def _num_workers() -> int:
    raw = os.environ.get("ILRFV_WORKERS", "").strip()
    if not raw:
        return 1
    workers = int(raw)
    if workers < 1:
        raise ValueError("ILRFV_WORKERS must be a positive integer")
    return workers


def solve_qp_batch(G, c, A, lower, upper, eps=1e-12, max_iterations=6):
    """Dispatch the batched QP solve, chunked over the configured workers."""
    workers = _num_workers()
    n = A.shape[0]
    if workers == 1 or n < 2 * workers:
        return _impl.solve_qp_batch(G, c, A, lower, upper, eps, max_iterations)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    parts = [
        _impl.solve_qp_batch(
            G[a:b], c[a:b], A[a:b], lower[a:b], upper[a:b], eps, max_iterations
        )
        for a, b in zip(bounds[:-1], bounds[1:])
        if b > a
    ]
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(6))
