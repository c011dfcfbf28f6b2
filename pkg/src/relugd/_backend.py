"""Select the kernel implementation at import time.

The compiled module ``relugd._kernels`` is used when it was built; otherwise,
or when ``RELUGD_PURE_PYTHON`` is set to a non-empty value other than ``0``,
the numpy fallback in ``relugd._kernels_py`` is used. Both produce
bit-identical results.
"""
import os

from relugd import _kernels_py


def _load():
    if os.environ.get("RELUGD_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py, "python"
    try:
        from relugd import _kernels
    except ImportError:
        return _kernels_py, "python"
    return _kernels, "cython"


kernels, BACKEND = _load()


def compiled_kernels():
    """Return the compiled kernel module, or ``None`` if it is not available."""
    try:
        from relugd import _kernels
    except ImportError:
        return None
    return _kernels
