"""QP kernel selection: compiled extension when available, numpy fallback.

Set LCQP2D_QP_BACKEND to "compiled" or "python" to force a choice; the
default "auto" prefers the compiled kernel. The selection is resolved once
per process.
"""

from __future__ import annotations

import os

_BACKEND = None


def _select():
    choice = os.environ.get("LCQP2D_QP_BACKEND", "auto")
    if choice not in ("auto", "compiled", "python"):
        raise ValueError(f"LCQP2D_QP_BACKEND must be auto|compiled|python, got {choice!r}")
    if choice in ("auto", "compiled"):
        try:
            from . import _ascore
            return _ascore
        except ImportError:
            if choice == "compiled":
                raise
    from . import active_set
    return active_set


def kernel():
    global _BACKEND
    if _BACKEND is None:
        _BACKEND = _select()
    return _BACKEND


def backend_name() -> str:
    return "compiled" if kernel().__name__.endswith("_ascore") else "python"
