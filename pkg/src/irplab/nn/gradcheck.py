"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

__all__ = ["grad_check", "GradCheckResult"]


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    worst_index: tuple[int, ...]


def grad_check(
    f,
    x: Tensor,
    eps: float = 1e-5,
    max_coords: int = 20,
    rng: np.random.Generator | None = None,
) -> GradCheckResult:
    """Compares analytic gradients of scalar-valued ``f`` at ``x``.

    Checks every coordinate for small tensors, otherwise a random subset
    of at least ``max_coords``. Relative error uses an absolute floor so
    near-zero gradient pairs do not blow up the ratio.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps out of sensible range [1e-7, 1e-3]")
    x.zero_grad()
    loss = f(x)
    loss.backward()
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(x.data)

    n = x.data.size
    if n <= max_coords:
        coords = np.arange(n)
    else:
        rng = rng or np.random.default_rng(0)
        coords = rng.choice(n, size=max_coords, replace=False)

    flat = x.data.reshape(-1)
    worst, worst_idx = 0.0, (0,)
    for c in coords:
        orig = flat[c]
        flat[c] = orig + eps
        hi = float(f(x).data)
        flat[c] = orig - eps
        lo = float(f(x).data)
        flat[c] = orig
        numeric = (hi - lo) / (2 * eps)
        a = analytic.reshape(-1)[c]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        if rel > worst:
            worst = rel
            worst_idx = np.unravel_index(c, x.data.shape)
    return GradCheckResult(worst, worst_idx)
