"""Hot kernels behind convolution and pooling.

The numba path is used when numba imports and ``RNAS_NUMBA`` is not set to
``0``; otherwise the pure-numpy path is used. Both produce bit-identical
results.
"""

import os

from . import _numpy
from ._numpy import out_size

BACKEND = "numpy"
if os.environ.get("RNAS_NUMBA", "1").lower() not in ("0", "false", "no", "off"):
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover
        _impl = _numpy
else:
    _impl = _numpy

im2col = _impl.im2col
col2im = _impl.col2im
maxpool = _impl.maxpool
maxpool_backward = _impl.maxpool_backward

__all__ = ["BACKEND", "col2im", "im2col", "maxpool", "maxpool_backward", "out_size"]
