"""Minimal tensor autodiff, layers, optimizer and checkpoint I/O."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, grad_check
from .layers import Conv1d, Conv2d, Dense, ParamModule, glorot_uniform
from .optim import Adam
from .tensor import Tensor, concat, l1_loss, softmax_over_branches

__all__ = [
    "Tensor",
    "concat",
    "l1_loss",
    "softmax_over_branches",
    "Conv1d",
    "Conv2d",
    "Dense",
    "ParamModule",
    "glorot_uniform",
    "Adam",
    "grad_check",
    "GradCheckResult",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]
