"""Backend selection for the hot inner loops.

The compiled extension is preferred when importable; the numpy fallback is
selected otherwise.  Override with KURAMOTO_FLUCT_BACKEND=cython|python.
Both backends consume random numbers identically, so seeds are portable;
trajectories are bit-reproducible per backend (see `_kernels_py`).
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("KURAMOTO_FLUCT_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _kernels_py
elif _requested == "cython":
    from . import _kernels as _impl  # raises if the extension was not built
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND_NAME
em_run = _impl.em_run
spde_run = _impl.spde_run


def get_backend(name: str | None = None):
    """Return (em_run, spde_run, backend_name) for an explicit backend choice."""
    if name is None or name == BACKEND:
        return em_run, spde_run, BACKEND
    if name == "python":
        return _kernels_py.em_run, _kernels_py.spde_run, "python"
    if name == "cython":
        from . import _kernels
        return _kernels.em_run, _kernels.spde_run, "cython"
    raise ValueError(f"unknown backend {name!r}")
