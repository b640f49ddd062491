"""Pick the compiled kernels when importable, else the NumPy fallback.

``NSAC_BACKEND=python`` forces the fallback; ``NSAC_BACKEND=cython`` makes a
missing extension an import error instead of a silent downgrade.
"""

import os

from nsac import _pykernels

_requested = os.environ.get("NSAC_BACKEND", "").strip().lower()

if _requested == "python":
    kernels = _pykernels
else:
    try:
        from nsac import _kernels as kernels
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _pykernels

BACKEND = "cython" if kernels is not _pykernels else "python"


def get_kernels(name=None):
    """Kernel module for ``name`` (``"cython"``/``"python"``), default the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        from nsac import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
