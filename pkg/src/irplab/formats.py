"""On-disk formats: PNG captures, IRPQ raw captures, and .flo flow fields.

IRPQ layout (for bit depths PNG cannot carry, i.e. m_max != 255):
8-byte header -- magic ``IRPQ``, u16 width, u16 height (little endian) --
followed by width*height*3 u16 little-endian values, row major with
interleaved channels.

Flow files use the common float32 layout: magic 202021.25, i32 width,
i32 height, then row-major interleaved (u, v) float32 pairs.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .imaging import FlowField, QuantizedImage

__all__ = [
    "FormatError",
    "write_capture",
    "read_capture",
    "write_flow",
    "read_flow",
]

FLO_MAGIC = 202021.25
IRPQ_MAGIC = b"IRPQ"


class FormatError(ValueError):
    """File does not conform to the expected layout."""


def write_capture(path: str | Path, img: QuantizedImage) -> None:
    """Writes an 8-bit capture as PNG, any other bit depth as IRPQ raw."""
    path = Path(path)
    if img.m_max == 255:
        Image.fromarray(img.data.astype(np.uint8), mode="RGB").save(path, format="PNG")
        return
    if img.width > 0xFFFF or img.height > 0xFFFF:
        raise FormatError("IRPQ supports dimensions up to 65535")
    header = IRPQ_MAGIC + struct.pack("<HH", img.width, img.height)
    payload = img.data.astype("<u2").tobytes()
    path.write_bytes(header + payload)


def read_capture(path: str | Path, m_max: int = 255) -> QuantizedImage:
    """Reads a capture written by :func:`write_capture`."""
    path = Path(path)
    if m_max == 255:
        try:
            with Image.open(path) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except Exception as exc:
            raise FormatError(f"not a readable PNG: {path}") from exc
        return QuantizedImage(arr, m_max=255)
    raw = path.read_bytes()
    if len(raw) < 8 or raw[:4] != IRPQ_MAGIC:
        raise FormatError(f"bad IRPQ magic in {path}")
    width, height = struct.unpack("<HH", raw[4:8])
    expected = 8 + width * height * 3 * 2
    if len(raw) != expected:
        raise FormatError(f"truncated IRPQ file {path}: {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<u2", offset=8).reshape(height, width, 3)
    if data.max(initial=0) > m_max:
        raise FormatError(f"IRPQ values exceed m_max={m_max} in {path}")
    return QuantizedImage(data.astype(np.uint16), m_max=m_max)


def write_flow(path: str | Path, flow: FlowField) -> None:
    """Writes a flow field in the float32 .flo layout."""
    path = Path(path)
    h, w = flow.height, flow.width
    uv = np.empty((h, w, 2), dtype="<f4")
    uv[..., 0] = flow.u
    uv[..., 1] = flow.v
    header = struct.pack("<fii", FLO_MAGIC, w, h)
    path.write_bytes(header + uv.tobytes())


def read_flow(path: str | Path) -> FlowField:
    """Reads a .flo flow field, validating magic and size."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12:
        raise FormatError(f"truncated flow header in {path}")
    magic, w, h = struct.unpack("<fii", raw[:12])
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"bad flow magic {magic!r} in {path}")
    expected = 12 + w * h * 2 * 4
    if w <= 0 or h <= 0 or len(raw) != expected:
        raise FormatError(f"truncated flow file {path}: {len(raw)} bytes, expected {expected}")
    uv = np.frombuffer(raw, dtype="<f4", offset=12).reshape(h, w, 2).astype(np.float64)
    return FlowField(uv[..., 0], uv[..., 1])
