"""Binary parameter checkpoints.

Layout (little endian): magic ``IRPW``, u32 entry count, then for each
entry u32 name length + UTF-8 name, u32 rank, rank u32 dims, and the
payload as float64. Round-trips are bit exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint", "CheckpointError"]

MAGIC = b"IRPW"


class CheckpointError(ValueError):
    pass


def save_checkpoint(params: dict[str, np.ndarray], path: str | Path) -> None:
    chunks = [MAGIC, struct.pack("<I", len(params))]
    for name, arr in params.items():
        arr = np.asarray(arr, dtype=np.float64)
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic in {path}")
    (count,) = struct.unpack("<I", raw[4:8])
    pos = 8
    params: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            name = raw[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}I", raw, pos)
            pos += 4 * rank
            n = int(np.prod(shape)) if rank else 1
            arr = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).reshape(shape)
            pos += 8 * n
            params[name] = arr.astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"truncated checkpoint {path}") from exc
    if pos != len(raw):
        raise CheckpointError(f"trailing bytes in checkpoint {path}")
    return params
