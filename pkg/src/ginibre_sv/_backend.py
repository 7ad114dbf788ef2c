"""Select the compiled or pure-Python inner kernel.

``GINIBRE_SV_BACKEND`` may be ``auto`` (default), ``compiled`` or ``python``.
"""
from __future__ import annotations

import os

from . import _fallback

NAME = "python"
segment_moments = _fallback.segment_moments
_compiled = None

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def use(name: str) -> str:
    """Switch backend at runtime; returns the active name."""
    global NAME, segment_moments
    if name == "auto":
        name = "compiled" if _compiled is not None else "python"
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel is not available; rebuild the package")
        segment_moments = _compiled.segment_moments
    elif name == "python":
        segment_moments = _fallback.segment_moments
    else:
        raise ValueError(f"unknown backend {name!r}")
    NAME = name
    return NAME


def available() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])


use(os.environ.get("GINIBRE_SV_BACKEND", "auto"))
