"""Pick the compiled kernels when available, else the numpy fallback.

Set ``ECLIPSEKIT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if os.environ.get("ECLIPSEKIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

convolve2d_reflect = _impl.convolve2d_reflect
smo_solve = _impl.smo_solve
reflect_index = _impl.reflect_index
