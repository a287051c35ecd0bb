"""Backend selection for the hot convolution/pooling kernels.

The compiled extension is used when it was built; otherwise, or when
``BASISGUARD_PURE_PYTHON=1`` is set, the numpy fallback is used.
"""

import os

from . import _kernels_py

if os.environ.get("BASISGUARD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

im2col3x3 = _impl.im2col3x3
col2im3x3 = _impl.col2im3x3
maxpool2_forward = _impl.maxpool2_forward
maxpool2_backward = _impl.maxpool2_backward
