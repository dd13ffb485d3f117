"""Select the convolution kernels at import time.

The compiled extension is used when it is importable; setting
``EGODQN_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from egodqn.nn import _fallback

fallback = _fallback

if os.environ.get("EGODQN_PURE_PYTHON", "") not in ("", "0"):
    compiled = None
else:
    try:
        from egodqn.nn import _kernels as compiled
    except ImportError:
        compiled = None

_active = compiled or fallback
BACKEND = "cython" if compiled is not None else "python"

im2col = _active.im2col
col2im = _active.col2im
