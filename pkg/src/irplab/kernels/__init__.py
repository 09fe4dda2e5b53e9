"""Convolution kernel backend selection.

Two implementations coexist: a compiled direct-loop extension and a
numpy im2col fallback. When the extension imported cleanly the active
backend is "compiled" and each call is routed to whichever
implementation is faster for its shape: the direct loops win on grouped
(depthwise) convolutions, where im2col degenerates into many tiny
matmuls, while BLAS-backed im2col wins on dense channel-heavy ones (see
benchmarks/bench_kernels.py). ``IRPLAB_FORCE_FALLBACK=1`` pins the pure
numpy fallback, which keeps both paths testable on one install.
"""

import os

from ._reference import conv_output_size
from ._reference import conv2d_backward as _ref_backward
from ._reference import conv2d_forward as _ref_forward

BACKEND = "numpy"
conv2d_forward = _ref_forward
conv2d_backward = _ref_backward

if os.environ.get("IRPLAB_FORCE_FALLBACK", "0") != "1":
    try:
        from . import _convkernels

        def conv2d_forward(x, w, stride=1, padding=0, dilation=1, groups=1):
            if groups > 1:
                return _convkernels.conv2d_forward(x, w, stride, padding, dilation, groups)
            return _ref_forward(x, w, stride, padding, dilation, groups)

        def conv2d_backward(x, w, gy, stride=1, padding=0, dilation=1, groups=1):
            if groups > 1:
                return _convkernels.conv2d_backward(x, w, gy, stride, padding, dilation, groups)
            return _ref_backward(x, w, gy, stride, padding, dilation, groups)

        BACKEND = "compiled"
    except ImportError:
        pass

__all__ = ["BACKEND", "conv2d_forward", "conv2d_backward", "conv_output_size"]
