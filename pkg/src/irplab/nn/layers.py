"""Parameterized layers on top of the autodiff tensor."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["Conv2d", "Conv1d", "Dense", "ParamModule", "glorot_uniform"]


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class ParamModule:
    """Base with named-parameter traversal for checkpoints and optimizers."""

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        params = []
        for attr, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                params.append((attr, value))
            elif isinstance(value, ParamModule):
                params.extend((f"{attr}.{n}", p) for n, p in value.named_parameters())
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, ParamModule):
                        params.extend((f"{attr}.{i}.{n}", p) for n, p in item.named_parameters())
                    elif isinstance(item, Tensor) and item.requires_grad:
                        params.append((f"{attr}.{i}", item))
        return params

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


class Conv2d(ParamModule):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        dilation: int = 1,
        groups: int = 1,
        bias: bool = True,
    ):
        if in_channels % groups or out_channels % groups:
            raise ValueError("channels must be divisible by groups")
        self.stride, self.padding, self.dilation, self.groups = stride, padding, dilation, groups
        cg = in_channels // groups
        fan_in = cg * kernel_size * kernel_size
        fan_out = (out_channels // groups) * kernel_size * kernel_size
        self.weight = Tensor(
            glorot_uniform(rng, (out_channels, cg, kernel_size, kernel_size), fan_in, fan_out),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = x.conv2d(self.weight, self.stride, self.padding, self.dilation, self.groups)
        if self.bias is not None:
            y = y + self.bias.reshape(1, -1, 1, 1)
        return y


class Conv1d(ParamModule):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        padding: int = 0,
        bias: bool = True,
    ):
        self.padding = padding
        fan_in = in_channels * kernel_size
        fan_out = out_channels * kernel_size
        self.weight = Tensor(
            glorot_uniform(rng, (out_channels, in_channels, kernel_size), fan_in, fan_out),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = x.conv1d(self.weight, padding=self.padding)
        if self.bias is not None:
            y = y + self.bias.reshape(1, -1, 1)
        return y


class Dense(ParamModule):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        self.weight = Tensor(
            glorot_uniform(rng, (in_features, out_features), in_features, out_features),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x.matmul(self.weight) + self.bias
