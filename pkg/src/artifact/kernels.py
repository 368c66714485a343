"""Backend selection for the Nystrom hot kernels.

The compiled extension is preferred. Setting the environment variable
``ARTIFACT_PURE_PYTHON=1`` forces the numpy fallback, which is also used
automatically when the extension has not been built.
"""

from __future__ import annotations

import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)


def _select():
    if os.environ.get("ARTIFACT_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on build
        log.info("compiled kernels unavailable, using numpy fallback")
        return _kernels_py, "python"
    return _kernels, "cython"


_impl, BACKEND = _select()

closed_blocks = _impl.closed_blocks
arc_matrix = _impl.arc_matrix
hankel01 = _impl.hankel01

__all__ = ["BACKEND", "closed_blocks", "arc_matrix", "hankel01"]
