"""Kernel backend selection.

The compiled Cython core is used when importable; `SCHROCURVE_PURE=1`
forces the numpy fallback.  Both backends implement the same contracts
(see `fallback.py`); results agree to round-off but are only guaranteed
bit-identical within one backend.
"""

import os

from . import fallback

if os.environ.get("SCHROCURVE_PURE", "0") == "1":
    backend = fallback
else:
    try:
        from . import _core as backend  # type: ignore[no-redef]
    except ImportError:
        backend = fallback

BACKEND_NAME = backend.BACKEND

multiplier_apply = backend.multiplier_apply
separable_apply = backend.separable_apply
strang_run = backend.strang_run
rk4_run = backend.rk4_run
