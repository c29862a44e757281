"""Hot-loop kernels, compiled when available.

The Cython extension ``acgap._ext._kernels`` is used if it was built;
otherwise the pure-Python versions in ``acgap._fallback`` are used. Set
``ACGAP_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("ACGAP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ext import _kernels as _compiled
    except ImportError:
        _compiled = None
    else:
        BACKEND = "cython"
else:
    _compiled = None

_impl = _compiled if _compiled is not None else _fallback

rollout = _impl.rollout
score_gradient = _impl.score_gradient

__all__ = ["BACKEND", "rollout", "score_gradient"]
