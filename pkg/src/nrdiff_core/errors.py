"""Exception hierarchy shared by every nrdiff_core subpackage."""

from __future__ import annotations

from typing import Optional


class NRDiffError(Exception):
    """Base class for all library errors."""


class ConfigError(NRDiffError, ValueError):
    """Raised for invalid configuration values or unknown config keys."""


class ShapeError(NRDiffError, ValueError):
    """Raised when tensor shapes, step indices or bank indices are out of contract."""


class FormatError(NRDiffError):
    """Raised when a binary artifact (bank, checkpoint, dataset, packet, raster) is corrupt."""


class PacketLostError(NRDiffError):
    """Raised when a packet header cannot be recovered after strong decoding."""


class TrainingDivergedError(NRDiffError):
    """Raised when the loss or parameters stop being finite."""

    def __init__(self, message: str, step: Optional[int] = None) -> None:
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class StageError(NRDiffError):
    """Wraps a failure raised inside a named pipeline stage."""

    def __init__(self, stage: str, error: Exception) -> None:
        super().__init__(f"[{stage}] {error}")
        self.stage = stage
        self.error = error


__all__ = [
    "NRDiffError",
    "ConfigError",
    "ShapeError",
    "FormatError",
    "PacketLostError",
    "TrainingDivergedError",
    "StageError",
]
