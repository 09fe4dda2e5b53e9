# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution kernels.

Direct-loop implementation over typed memoryviews. Loops are ordered so
each kernel tap is hoisted to a scalar and the innermost loop sweeps a
contiguous output row, which the C compiler can vectorize.
"""

import numpy as np

cimport numpy as cnp


cdef inline Py_ssize_t _lo(Py_ssize_t off, Py_ssize_t stride) nogil:
    # smallest index q >= 0 with q*stride + off >= 0
    if off >= 0:
        return 0
    return (-off + stride - 1) // stride


cdef inline Py_ssize_t _hi(Py_ssize_t off, Py_ssize_t stride, Py_ssize_t size,
                           Py_ssize_t limit) nogil:
    # largest index q <= limit with q*stride + off <= size - 1
    cdef Py_ssize_t q = (size - 1 - off) // stride
    if q > limit:
        q = limit
    return q


def conv2d_forward(x_arr, w_arr, int stride=1, int padding=1, int dilation=1, int groups=1):
    """Cross-correlation of (N, Cin, H, W) with (Cout, Cin/g, kh, kw)."""
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef Py_ssize_t n_batch = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], cg = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    if cin != cg * groups or cout % groups:
        raise ValueError("channel/group mismatch")
    cdef Py_ssize_t ho = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    cdef Py_ssize_t wo = (wd + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    cdef Py_ssize_t og = cout // groups
    y_arr = np.zeros((n_batch, cout, ho, wo))
    cdef double[:, :, :, ::1] y = y_arr
    cdef Py_ssize_t n, oc, g, ic, i, j, oh, ow, ih
    cdef Py_ssize_t hoff, woff, oh_lo, oh_hi, ow_lo, ow_hi
    cdef Py_ssize_t xbase
    cdef double wv
    cdef double* xrow
    cdef double* yrow
    with nogil:
        for n in range(n_batch):
            for oc in range(cout):
                g = oc // og
                for ic in range(cg):
                    for i in range(kh):
                        hoff = i * dilation - padding
                        oh_lo = _lo(hoff, stride)
                        oh_hi = _hi(hoff, stride, h, ho - 1)
                        for j in range(kw):
                            wv = w[oc, ic, i, j]
                            if wv == 0.0:
                                continue
                            woff = j * dilation - padding
                            ow_lo = _lo(woff, stride)
                            ow_hi = _hi(woff, stride, wd, wo - 1)
                            for oh in range(oh_lo, oh_hi + 1):
                                ih = oh * stride + hoff
                                xrow = &x[n, g * cg + ic, ih, 0]
                                yrow = &y[n, oc, oh, 0]
                                xbase = woff + ow_lo * stride
                                if stride == 1:
                                    for ow in range(ow_lo, ow_hi + 1):
                                        yrow[ow] += wv * xrow[ow + woff]
                                else:
                                    for ow in range(ow_lo, ow_hi + 1):
                                        yrow[ow] += wv * xrow[ow * stride + woff]
    return y_arr


def conv2d_backward(x_arr, w_arr, gy_arr, int stride=1, int padding=1, int dilation=1,
                    int groups=1):
    """Gradients w.r.t. input and weights for conv2d_forward."""
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] gy = np.ascontiguousarray(gy_arr, dtype=np.float64)
    cdef Py_ssize_t n_batch = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], cg = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t og = cout // groups
    gx_arr = np.zeros((n_batch, cin, h, wd))
    gw_arr = np.zeros((cout, cg, kh, kw))
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t n, oc, g, ic, i, j, oh, ow, ih
    cdef Py_ssize_t hoff, woff, oh_lo, oh_hi, ow_lo, ow_hi
    cdef double wv, acc, go
    cdef double* xrow
    cdef double* gxrow
    cdef double* gyrow
    with nogil:
        for n in range(n_batch):
            for oc in range(cout):
                g = oc // og
                for ic in range(cg):
                    for i in range(kh):
                        hoff = i * dilation - padding
                        oh_lo = _lo(hoff, stride)
                        oh_hi = _hi(hoff, stride, h, ho - 1)
                        for j in range(kw):
                            wv = w[oc, ic, i, j]
                            woff = j * dilation - padding
                            ow_lo = _lo(woff, stride)
                            ow_hi = _hi(woff, stride, wd, wo - 1)
                            acc = 0.0
                            for oh in range(oh_lo, oh_hi + 1):
                                ih = oh * stride + hoff
                                xrow = &x[n, g * cg + ic, ih, 0]
                                gxrow = &gx[n, g * cg + ic, ih, 0]
                                gyrow = &gy[n, oc, oh, 0]
                                if stride == 1:
                                    for ow in range(ow_lo, ow_hi + 1):
                                        go = gyrow[ow]
                                        acc += go * xrow[ow + woff]
                                        gxrow[ow + woff] += go * wv
                                else:
                                    for ow in range(ow_lo, ow_hi + 1):
                                        go = gyrow[ow]
                                        acc += go * xrow[ow * stride + woff]
                                        gxrow[ow * stride + woff] += go * wv
                            gw[oc, ic, i, j] += acc
    return gx_arr, gw_arr
