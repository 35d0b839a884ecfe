"""Kernel backend selection.

The hot inner-loop primitives exist twice: a compiled Cython extension
(``wtcs._kernels``) and a pure-numpy fallback (``wtcs._kernels_py``).  Both
produce bit-identical results; the compiled one is just faster.  Selection
happens once at import time and can be forced with the ``WTCS_KERNELS``
environment variable:

    WTCS_KERNELS=auto      prefer compiled, fall back to python (default)
    WTCS_KERNELS=compiled  require the extension, raise if missing
    WTCS_KERNELS=python    always use the numpy fallback
"""

import os

from . import _kernels_py


def _load(choice):
    if choice == "python":
        return _kernels_py
    if choice == "compiled":
        from . import _kernels

        return _kernels
    if choice == "auto":
        try:
            from . import _kernels

            return _kernels
        except ImportError:
            return _kernels_py
    raise ValueError(
        f"WTCS_KERNELS must be 'auto', 'compiled', or 'python', got {choice!r}"
    )


kernels = _load(os.environ.get("WTCS_KERNELS", "auto").strip().lower())

BACKEND_NAME = kernels.BACKEND_NAME

dwt_level = kernels.dwt_level
idwt_level = kernels.idwt_level
soft_threshold = kernels.soft_threshold
group_gather = kernels.group_gather
group_scatter_add = kernels.group_scatter_add
group_shrink = kernels.group_shrink


def available_backends():
    """Names of the kernel backends importable in this environment."""
    names = []
    try:
        from . import _kernels  # noqa: F401

        names.append("compiled")
    except ImportError:
        pass
    names.append("python")
    return names
