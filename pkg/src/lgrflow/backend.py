"""Selects the compiled kernels when available, the numpy twin otherwise.

Set ``LGRFLOW_BACKEND=python`` to force the fallback (e.g. for debugging or
to compare results).
"""

from __future__ import annotations

import os

from . import _kernels_py

STATUS_OK = _kernels_py.STATUS_OK
STATUS_INSUFFICIENT = _kernels_py.STATUS_INSUFFICIENT
STATUS_SINGULAR = _kernels_py.STATUS_SINGULAR

_compiled = None
if os.environ.get("LGRFLOW_BACKEND", "").lower() != "python":
    try:
        from . import _lgr_ext as _compiled
    except ImportError:
        _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"


def get_backend(name: str | None = None):
    """Kernel module by name (``"compiled"`` / ``"python"``); default is the active one."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
