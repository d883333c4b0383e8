"""Little-endian binary record helpers shared by the bank, checkpoint and dataset formats."""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import FormatError


class BinaryWriter:
    def __init__(self) -> None:
        self._chunks: list[bytes] = []

    def magic(self, value: bytes) -> None:
        self._chunks.append(value)

    def u8(self, value: int) -> None:
        self._chunks.append(struct.pack("<B", value))

    def u32(self, value: int) -> None:
        self._chunks.append(struct.pack("<I", value))

    def u64(self, value: int) -> None:
        self._chunks.append(struct.pack("<Q", value))

    def f32_array(self, values: NDArray) -> None:
        self._chunks.append(np.ascontiguousarray(values, dtype="<f4").tobytes())

    def raw(self, data: bytes) -> None:
        self._chunks.append(data)

    def to_bytes(self) -> bytes:
        return b"".join(self._chunks)

    def write(self, path: Path) -> None:
        """Write atomically: a reader never sees a half-written artifact."""

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)


class BinaryReader:
    def __init__(self, data: bytes, label: str) -> None:
        self.data = data
        self.label = label
        self.offset = 0

    @classmethod
    def open(cls, path: Path, label: str) -> "BinaryReader":
        path = Path(path)
        if not path.exists():
            raise FormatError(f"{label}: file not found: {path}")
        return cls(path.read_bytes(), label)

    def _take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise FormatError(
                f"{self.label}: truncated while reading {what} "
                f"(need {size} bytes at offset {self.offset}, have {len(self.data) - self.offset})"
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def expect_magic(self, magic: bytes) -> None:
        found = self._take(len(magic), "magic")
        if found != magic:
            raise FormatError(f"{self.label}: bad magic {found!r}, expected {magic!r}")

    def expect_version(self, supported: Tuple[int, ...]) -> int:
        version = self.u32("format version")
        if version not in supported:
            raise FormatError(f"{self.label}: unsupported format version {version}")
        return version

    def u8(self, what: str) -> int:
        return struct.unpack("<B", self._take(1, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self._take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self._take(8, what))[0]

    def f32_array(self, count: int, what: str) -> NDArray[np.float32]:
        chunk = self._take(4 * count, what)
        return np.frombuffer(chunk, dtype="<f4").astype(np.float32)

    def raw(self, size: int, what: str) -> bytes:
        return self._take(size, what)

    def expect_end(self) -> None:
        if self.offset != len(self.data):
            raise FormatError(
                f"{self.label}: {len(self.data) - self.offset} unexpected trailing bytes"
            )
