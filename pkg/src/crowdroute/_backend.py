"""Pick the expectimax kernel at import time.

The compiled ``_kernel`` extension is used when it imports; otherwise the
pure-Python ``_kernel_py`` takes over.  ``CROWDROUTE_BACKEND=python`` forces
the fallback, ``CROWDROUTE_BACKEND=compiled`` makes a missing extension an
error.
"""
from __future__ import annotations

import os

from . import _kernel_py

_choice = os.environ.get("CROWDROUTE_BACKEND", "auto").lower()

if _choice == "python":
    kernel = _kernel_py
    BACKEND = "python"
else:
    try:
        from . import _kernel as kernel  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        kernel = _kernel_py
        BACKEND = "python"

KERNELS = {"python": _kernel_py}
try:
    from . import _kernel as _compiled

    KERNELS["compiled"] = _compiled
except ImportError:
    pass
