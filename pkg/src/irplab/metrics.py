"""Fidelity and correlation metrics.

PSNR and a windowed structural-similarity score feed the label generator;
Spearman (SRCC) and Pearson (PLCC) correlations drive the evaluation
protocol. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import QuantizedImage

__all__ = [
    "MetricRange",
    "PSNR_CAP_DB",
    "PSNR_RANGE",
    "SSIM_RANGE",
    "psnr",
    "ssim",
    "normalize_metric",
    "srcc",
    "plcc",
    "average_ranks",
]

PSNR_CAP_DB = 100.0

# Dataset-wide normalization bounds; fixed so scores are comparable
# across runs instead of depending on per-dataset extremes.


@dataclass(frozen=True)
class MetricRange:
    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("require hi > lo")


PSNR_RANGE = MetricRange("psnr", 10.0, 50.0)
SSIM_RANGE = MetricRange("ssim", 0.0, 1.0)


class DegenerateSeriesError(ValueError):
    """Correlation input has no variance."""


def _check_pair(a: QuantizedImage, b: QuantizedImage) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    if a.m_max != b.m_max:
        raise ValueError("images quantized to different m_max")


def psnr(a: QuantizedImage, b: QuantizedImage) -> float:
    """Peak signal-to-noise ratio in dB, capped at 100 for exact matches."""
    _check_pair(a, b)
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(a.m_max**2 / mse))


def _window_sums(x: np.ndarray, win: int) -> np.ndarray:
    """Sums over all win x win windows (stride 1, valid), per channel."""
    c = np.cumsum(np.cumsum(x, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0), (0, 0)))
    return c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]


def ssim(
    a: QuantizedImage,
    b: QuantizedImage,
    window: int = 8,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Mean local structural similarity over sliding windows.

    Uses uniform windows (stride 1, fully inside the image) and averages
    the per-channel maps. Stabilizing constants follow the usual
    c1=(k1*L)^2, c2=(k2*L)^2 with L = m_max.
    """
    _check_pair(a, b)
    h, w = a.data.shape[:2]
    if window > min(h, w):
        raise ValueError(f"window {window} exceeds image size {h}x{w}")
    x = a.data.astype(np.float64)
    y = b.data.astype(np.float64)
    n = float(window * window)
    mu_x = _window_sums(x, window) / n
    mu_y = _window_sums(y, window) / n
    var_x = _window_sums(x * x, window) / n - mu_x * mu_x
    var_y = _window_sums(y * y, window) / n - mu_y * mu_y
    cov = _window_sums(x * y, window) / n - mu_x * mu_y
    c1 = (k1 * a.m_max) ** 2
    c2 = (k2 * a.m_max) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def normalize_metric(x: float, rng: MetricRange, higher_better: bool = True) -> float:
    """Clamps and rescales a metric value to [0, 1]."""
    t = min(1.0, max(0.0, (x - rng.lo) / (rng.hi - rng.lo)))
    return t if higher_better else 1.0 - t


def average_ranks(x: np.ndarray) -> np.ndarray:
    """Ranks starting at 1; ties receive the mean of their rank span."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    """Pearson r plus a flag marking degenerate (zero-variance) input."""
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(np.sum(xc * xc)))
    sy = float(np.sqrt(np.sum(yc * yc)))
    if sx == 0.0 or sy == 0.0:
        return 0.0, True
    r = float(np.sum(xc * yc) / (sx * sy))
    return max(-1.0, min(1.0, r)), False


def srcc(x, y, *, raise_degenerate: bool = False) -> float:
    """Spearman rank correlation (average ranks for ties).

    Zero-variance inputs yield 0.0, or :class:`DegenerateSeriesError`
    when ``raise_degenerate`` is set.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("srcc expects two equal-length 1D series")
    if len(x) < 2:
        raise ValueError("srcc needs at least 2 points")
    r, degenerate = _pearson(average_ranks(x), average_ranks(y))
    if degenerate and raise_degenerate:
        raise DegenerateSeriesError("constant series has no rank correlation")
    return r


def plcc(x, y, *, raise_degenerate: bool = False) -> float:
    """Pearson linear correlation with the same degenerate handling as srcc."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("plcc expects two equal-length 1D series")
    if len(x) < 2:
        raise ValueError("plcc needs at least 2 points")
    r, degenerate = _pearson(x, y)
    if degenerate and raise_degenerate:
        raise DegenerateSeriesError("constant series has no linear correlation")
    return r
