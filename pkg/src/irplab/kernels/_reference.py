"""Pure-numpy convolution kernels (im2col), the fallback backend."""

from __future__ import annotations

import numpy as np

__all__ = ["conv2d_forward", "conv2d_backward", "conv_output_size"]


def conv_output_size(size: int, k: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int, dilation: int):
    n, c, h, w = x.shape
    ho = conv_output_size(h, kh, stride, padding, dilation)
    wo = conv_output_size(w, kw, stride, padding, dilation)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = np.empty((n, c, kh, kw, ho, wo))
    for i in range(kh):
        for j in range(kw):
            hi, wi = i * dilation, j * dilation
            cols[:, :, i, j] = xp[:, :, hi : hi + ho * stride : stride, wi : wi + wo * stride : stride]
    return cols, ho, wo


def conv2d_forward(
    x: np.ndarray,
    w: np.ndarray,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
    groups: int = 1,
) -> np.ndarray:
    """Cross-correlation of (N, Cin, H, W) with (Cout, Cin/g, kh, kw)."""
    n, cin, _, _ = x.shape
    cout, cg, kh, kw = w.shape
    if cin != cg * groups or cout % groups:
        raise ValueError(f"channel/group mismatch: x has {cin}, w {w.shape}, groups {groups}")
    cols, ho, wo = _im2col(x, kh, kw, stride, padding, dilation)
    og = cout // groups
    y = np.empty((n, cout, ho, wo))
    for g in range(groups):
        col_g = cols[:, g * cg : (g + 1) * cg].reshape(n, cg * kh * kw, ho * wo)
        w_g = w[g * og : (g + 1) * og].reshape(og, cg * kh * kw)
        y[:, g * og : (g + 1) * og] = (w_g @ col_g).reshape(n, og, ho, wo)
    return y


def conv2d_backward(
    x: np.ndarray,
    w: np.ndarray,
    gy: np.ndarray,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
    groups: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients w.r.t. input and weights for :func:`conv2d_forward`."""
    n, cin, h, wd = x.shape
    cout, cg, kh, kw = w.shape
    og = cout // groups
    cols, ho, wo = _im2col(x, kh, kw, stride, padding, dilation)
    gw = np.empty_like(w)
    gcols = np.empty_like(cols)
    for g in range(groups):
        col_g = cols[:, g * cg : (g + 1) * cg].reshape(n, cg * kh * kw, ho * wo)
        gy_g = gy[:, g * og : (g + 1) * og].reshape(n, og, ho * wo)
        gw[g * og : (g + 1) * og] = (
            np.einsum("nop,ncp->oc", gy_g, col_g).reshape(og, cg, kh, kw)
        )
        w_g = w[g * og : (g + 1) * og].reshape(og, cg * kh * kw)
        gcols[:, g * cg : (g + 1) * cg] = (w_g.T @ gy_g).reshape(n, cg, kh, kw, ho, wo)
    gxp = np.zeros((n, cin, h + 2 * padding, wd + 2 * padding))
    for i in range(kh):
        for j in range(kw):
            hi, wi = i * dilation, j * dilation
            gxp[:, :, hi : hi + ho * stride : stride, wi : wi + wo * stride : stride] += gcols[
                :, :, i, j
            ]
    if padding:
        gx = gxp[:, :, padding:-padding, padding:-padding]
    else:
        gx = gxp
    return np.ascontiguousarray(gx), gw
