"""Reverse-mode autodiff over numpy arrays.

A :class:`Tensor` wraps a float64 array and records the closures needed
to push gradients back through the graph. The op set is deliberately
small: exactly what the predictor architecture uses.
"""

from __future__ import annotations

import numpy as np

from .. import kernels

__all__ = ["Tensor", "concat", "softmax_over_branches", "l1_loss"]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sums a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev: tuple[Tensor, ...] = ()

    # -- graph plumbing ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def _child(self, data: np.ndarray, parents: tuple[Tensor, ...]) -> Tensor:
        out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
        out._prev = parents if out.requires_grad else ()
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Populates .grad on every reachable requires_grad tensor."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise / arithmetic --------------------------------------

    def _coerce(self, other) -> Tensor:
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other) -> Tensor:
        other = self._coerce(other)
        out = self._child(self.data + other.data, (self, other))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.shape))

        out._backward = bwd
        return out

    __radd__ = __add__

    def __neg__(self) -> Tensor:
        return self * -1.0

    def __sub__(self, other) -> Tensor:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Tensor:
        return self._coerce(other) + (-self)

    def __mul__(self, other) -> Tensor:
        other = self._coerce(other)
        out = self._child(self.data * other.data, (self, other))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.shape))

        out._backward = bwd
        return out

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> Tensor:
        return self * (1.0 / float(scalar))

    def matmul(self, other: Tensor) -> Tensor:
        out = self._child(self.data @ other.data, (self, other))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        out._backward = bwd
        return out

    def relu(self) -> Tensor:
        mask = self.data > 0
        out = self._child(np.where(mask, self.data, 0.0), (self,))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(g * mask)

        out._backward = bwd
        return out

    def abs(self) -> Tensor:
        # subgradient at 0 is 0 by convention
        sign = np.sign(self.data)
        out = self._child(np.abs(self.data), (self,))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(g * sign)

        out._backward = bwd
        return out

    def exp(self) -> Tensor:
        val = np.exp(self.data)
        out = self._child(val, (self,))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(g * val)

        out._backward = bwd
        return out

    # -- shape ops -----------------------------------------------------

    def reshape(self, *shape: int) -> Tensor:
        out = self._child(self.data.reshape(shape), (self,))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(g.reshape(self.shape))

        out._backward = bwd
        return out

    def broadcast_to(self, shape: tuple[int, ...]) -> Tensor:
        out = self._child(np.broadcast_to(self.data, shape).copy(), (self,))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.shape))

        out._backward = bwd
        return out

    def sum(self) -> Tensor:
        out = self._child(np.asarray(self.data.sum()), (self,))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(np.broadcast_to(g, self.shape).copy())

        out._backward = bwd
        return out

    def mean_over(self, axes: tuple[int, ...]) -> Tensor:
        """Mean over the listed axes (kept out of the output shape)."""
        out_data = self.data.mean(axis=axes)
        count = int(np.prod([self.shape[a] for a in axes]))
        out = self._child(out_data, (self,))

        def bwd(g):
            if self.requires_grad:
                expanded = np.expand_dims(g, axes)
                self._accumulate(np.broadcast_to(expanded, self.shape) / count)

        out._backward = bwd
        return out

    # -- structured ops ------------------------------------------------

    def conv2d(
        self,
        weight: Tensor,
        stride: int = 1,
        padding: int = 0,
        dilation: int = 1,
        groups: int = 1,
    ) -> Tensor:
        """NCHW cross-correlation via the selected kernel backend."""
        y = kernels.conv2d_forward(self.data, weight.data, stride, padding, dilation, groups)
        out = self._child(y, (self, weight))

        def bwd(g):
            gx, gw = kernels.conv2d_backward(
                self.data, weight.data, g, stride, padding, dilation, groups
            )
            if self.requires_grad:
                self._accumulate(gx)
            if weight.requires_grad:
                weight._accumulate(gw)

        out._backward = bwd
        return out

    def conv1d(self, weight: Tensor, padding: int = 0) -> Tensor:
        """(N, C, L) convolution expressed through conv2d on a 1-row image."""
        n, c, length = self.shape
        x4 = self.reshape(n, c, 1, length)
        w4 = weight.reshape(weight.shape[0], weight.shape[1], 1, weight.shape[2])
        # pad only along the length axis: conv2d pads both, so crop rows
        y = x4.conv2d(w4, padding=padding)
        if padding:
            y = y.slice_rows(padding, padding + 1)
        return y.reshape(n, weight.shape[0], y.shape[3])

    def slice_rows(self, start: int, stop: int) -> Tensor:
        """Row slice on axis 2 of an NCHW tensor."""
        out = self._child(self.data[:, :, start:stop].copy(), (self,))

        def bwd(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[:, :, start:stop] = g
                self._accumulate(full)

        out._backward = bwd
        return out

    def avg_pool2d(self, factor: int = 2) -> Tensor:
        n, c, h, w = self.shape
        if h % factor or w % factor:
            raise ValueError(f"spatial dims {h}x{w} not divisible by {factor}")
        view = self.data.reshape(n, c, h // factor, factor, w // factor, factor)
        out = self._child(view.mean(axis=(3, 5)), (self,))

        def bwd(g):
            if self.requires_grad:
                up = np.repeat(np.repeat(g, factor, axis=2), factor, axis=3)
                self._accumulate(up / (factor * factor))

        out._backward = bwd
        return out

    def upsample_nearest(self, factor: int = 2) -> Tensor:
        out = self._child(
            np.repeat(np.repeat(self.data, factor, axis=2), factor, axis=3), (self,)
        )

        def bwd(g):
            if self.requires_grad:
                n, c, h, w = self.shape
                view = g.reshape(n, c, h, factor, w, factor)
                self._accumulate(view.sum(axis=(3, 5)))

        out._backward = bwd
        return out

    def global_avg_pool(self) -> Tensor:
        """(N, C, H, W) -> (N, C)."""
        return self.mean_over((2, 3))


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = Tensor(data, requires_grad=any(t.requires_grad for t in tensors))
    out._prev = tuple(tensors) if out.requires_grad else ()

    def bwd(g):
        offset = 0
        for t in tensors:
            size = t.shape[axis]
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + size)
            if t.requires_grad:
                t._accumulate(g[tuple(idx)])
            offset += size

    out._backward = bwd
    return out


def softmax_over_branches(logits: list[Tensor]) -> list[Tensor]:
    """Per-channel softmax across branch logits of identical shape.

    Numerically stabilized by max subtraction; the outputs sum to one
    elementwise.
    """
    stacked = np.stack([t.data for t in logits])
    shifted = stacked - stacked.max(axis=0, keepdims=True)
    expv = np.exp(shifted)
    weights = expv / expv.sum(axis=0, keepdims=True)
    outs = []
    requires = any(t.requires_grad for t in logits)
    for i, t in enumerate(logits):
        out = Tensor(weights[i], requires_grad=requires)
        out._prev = tuple(logits) if requires else ()

        def bwd(g, i=i):
            # d softmax_i / d logit_j = w_i (delta_ij - w_j)
            for j, src in enumerate(logits):
                if src.requires_grad:
                    delta = 1.0 if i == j else 0.0
                    src._accumulate(g * weights[i] * (delta - weights[j]))

        out._backward = bwd
        outs.append(out)
    return outs


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return (pred - target).abs().sum() / pred.data.size
