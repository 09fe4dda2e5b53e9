"""Dynamic-scene capture simulation.

Models the path from linear scene radiance to a quantized sRGB image:
motion integration during the exposure window, Poisson shot noise on the
collected photoelectrons, additive Gaussian read noise, and gamma
development with rounding and clamping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RadianceFrame",
    "FlowField",
    "ExposureConfig",
    "LinearImage",
    "QuantizedImage",
    "scale_flow_for_exposure",
    "warp_bilinear",
    "integrate_motion",
    "apply_shot_noise",
    "apply_read_noise",
    "develop_to_srgb",
    "simulate_capture",
]


class DimensionMismatchError(ValueError):
    """Spatial dimensions of two inputs disagree."""


@dataclass(frozen=True)
class RadianceFrame:
    """Ground-truth linear-light frame, values >= 0, shape (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) radiance data, got {arr.shape}")
        if arr.shape[0] <= 0 or arr.shape[1] <= 0:
            raise ValueError("empty frame")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("radiance must be finite and non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement in pixels over the reference interval.

    ``u`` is the horizontal component, ``v`` vertical, each (H, W).
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(np.asarray(self.u, dtype=np.float64))
        v = np.ascontiguousarray(np.asarray(self.v, dtype=np.float64))
        if u.ndim != 2 or u.shape != v.shape:
            raise ValueError(f"flow components must share a 2D shape, got {u.shape} vs {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("flow must be finite")
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


@dataclass(frozen=True)
class ExposureConfig:
    """Sensor and development parameters for one capture.

    ``delta_t`` is a dimensionless multiple of the flow's reference
    interval; ``gain`` converts integrated radiance to linear signal;
    ``full_well`` sets the electron count at linear signal 1.0.
    """

    delta_t: float = 1.0
    gain: float = 1.0
    full_well: float = 1000.0
    read_sigma: float = 0.01
    gamma: float = 1.0 / 2.2
    m_max: int = 255

    def __post_init__(self):
        if self.delta_t <= 0 or self.gain <= 0 or self.full_well <= 0:
            raise ValueError("delta_t, gain and full_well must be positive")
        if self.read_sigma < 0:
            raise ValueError("read_sigma must be non-negative")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")


@dataclass(frozen=True)
class LinearImage:
    """Linear-signal image; may hold negative values after read noise."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 3:
            raise ValueError(f"expected (H, W, C) data, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class QuantizedImage:
    """Developed sRGB image with integer values in [0, m_max]."""

    data: np.ndarray
    m_max: int = 255

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data))
        if arr.ndim != 3:
            raise ValueError(f"expected (H, W, C) data, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("quantized data must be integer typed")
        if np.any(arr < 0) or np.any(arr > self.m_max):
            raise ValueError(f"values outside [0, {self.m_max}]")
        dtype = np.uint8 if self.m_max <= 255 else np.uint16
        arr = np.ascontiguousarray(arr.astype(dtype))
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def scale_flow_for_exposure(flow: FlowField, cfg: ExposureConfig) -> FlowField:
    """Scales displacements linearly with exposure time."""
    return FlowField(flow.u * cfg.delta_t, flow.v * cfg.delta_t)


def warp_bilinear(data: np.ndarray, du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """Samples ``data`` at (x - du, y - dv) with bilinear interpolation.

    Coordinates are clamped to the image border, so content slides against
    an edge-replicated background instead of wrapping around.
    """
    h, w = data.shape[:2]
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    x = np.clip(xs - du, 0.0, w - 1.0)
    y = np.clip(ys - dv, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def default_substeps(flow: FlowField) -> int:
    """Substep count scaling with the blur length."""
    return max(3, int(np.ceil(flow.magnitude().max())) + 1)


def integrate_motion(
    frame: RadianceFrame,
    flow: FlowField,
    cfg: ExposureConfig,
    substeps: int | None = None,
) -> LinearImage:
    """Discretized exposure integral along an (already scaled) flow.

    Averages ``substeps`` bilinear warps of the frame at fractional
    multiples k/(substeps-1) of the flow and scales by delta_t * gain, so
    zero flow yields exactly delta_t * gain * frame.
    """
    if (frame.height, frame.width) != (flow.height, flow.width):
        raise DimensionMismatchError(
            f"frame {frame.height}x{frame.width} vs flow {flow.height}x{flow.width}"
        )
    if substeps is None:
        substeps = default_substeps(flow)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    scale = cfg.delta_t * cfg.gain
    if substeps == 1:
        return LinearImage(frame.data * scale)
    acc = np.zeros_like(frame.data)
    for k in range(substeps):
        t = k / (substeps - 1)
        acc += warp_bilinear(frame.data, flow.u * t, flow.v * t)
    return LinearImage(acc * (scale / substeps))


def apply_shot_noise(img: LinearImage, cfg: ExposureConfig, rng_seed: int) -> LinearImage:
    """Poisson shot noise on the photoelectron counts.

    Each value x becomes Poisson(x * full_well) / full_well; negative
    inputs are clamped to zero before sampling.
    """
    rng = np.random.default_rng(rng_seed)
    electrons = np.clip(img.data, 0.0, None) * cfg.full_well
    return LinearImage(rng.poisson(electrons).astype(np.float64) / cfg.full_well)


def apply_read_noise(img: LinearImage, cfg: ExposureConfig, rng_seed: int) -> LinearImage:
    """Additive zero-mean Gaussian readout noise."""
    if cfg.read_sigma == 0:
        return img
    rng = np.random.default_rng(rng_seed)
    return LinearImage(img.data + rng.normal(0.0, cfg.read_sigma, size=img.data.shape))


def develop_to_srgb(img: LinearImage, cfg: ExposureConfig) -> QuantizedImage:
    """Gamma development and quantization to integers in [0, m_max]."""
    x = np.clip(img.data, 0.0, 1.0)
    q = np.floor(np.power(x, cfg.gamma) * cfg.m_max + 0.5)
    q = np.clip(q, 0, cfg.m_max)
    dtype = np.uint8 if cfg.m_max <= 255 else np.uint16
    return QuantizedImage(q.astype(dtype), m_max=cfg.m_max)


# Fixed offsets separating the shot / read RNG streams of one capture.
_SHOT_STREAM = 0x5348
_READ_STREAM = 0x5244


def simulate_capture(
    frame: RadianceFrame,
    flow: FlowField,
    cfg: ExposureConfig,
    seed: int,
    substeps: int | None = None,
) -> QuantizedImage:
    """Full capture chain: flow scaling, motion integration, noise, development."""
    scaled = scale_flow_for_exposure(flow, cfg)
    linear = integrate_motion(frame, scaled, cfg, substeps=substeps)
    noisy = apply_shot_noise(linear, cfg, seed * 2 + _SHOT_STREAM)
    noisy = apply_read_noise(noisy, cfg, seed * 2 + _READ_STREAM)
    return develop_to_srgb(noisy, cfg)
