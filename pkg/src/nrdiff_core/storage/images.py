"""Farbfeld raster I/O for images in [-1, 1]."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import FormatError, ShapeError

FARBFELD_MAGIC = b"farbfeld"
_MAX = 65535


def to_farbfeld(image: NDArray[np.float64]) -> bytes:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise ShapeError(f"farbfeld needs a 1- or 3-channel C x H x W image, got {image.shape}")
    C, H, W = image.shape
    scaled = np.rint((np.clip(image, -1.0, 1.0) + 1.0) * 0.5 * _MAX).astype(">u2")
    rgba = np.empty((H, W, 4), dtype=">u2")
    rgba[..., :3] = np.moveaxis(np.repeat(scaled, 3 // C, axis=0), 0, -1)
    rgba[..., 3] = _MAX
    return FARBFELD_MAGIC + struct.pack(">II", W, H) + rgba.tobytes()


def write_farbfeld(path: Path, image: NDArray[np.float64]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_farbfeld(image))
    return path


def read_farbfeld(path: Path) -> NDArray[np.float64]:
    """Read back a 3-channel image in [-1, 1] (alpha dropped)."""

    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != FARBFELD_MAGIC:
        raise FormatError(f"farbfeld: bad magic in {path}")
    W, H = struct.unpack(">II", data[8:16])
    expected = 16 + W * H * 8
    if len(data) != expected:
        raise FormatError(f"farbfeld: expected {expected} bytes, found {len(data)}")
    rgba = np.frombuffer(data[16:], dtype=">u2").reshape(H, W, 4)
    return np.moveaxis(rgba[..., :3].astype(np.float64) / _MAX * 2.0 - 1.0, -1, 0)
