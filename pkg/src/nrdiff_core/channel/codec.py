"""Dual-rate packet codec for (semantic condition, noise index).

Header and condition bits are protected by an r-fold repetition code (majority
vote); the index bits use a weaker code. Bits are MSB-first everywhere and the
wire form pads with zero bits to a byte boundary.

Uncoded packet layout::

    version   4   low 3 bits = format version, high bit = run-length flag
    K - 1     4
    H        16
    W        16
    N        32
    L        32   condition payload bit length
    payload   L   labels (4 bits each, row-major, or run-length rows) + edge bitmap
    index     ceil(log2 N)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import ConfigError, FormatError, PacketLostError, ShapeError
from nrdiff_core.semantics import MAX_CLASSES, SemanticCondition

logger = logging.getLogger(__name__)

Bits = NDArray[np.uint8]

PACKET_VERSION = 1
VERSION_MASK = 0b0111
RLE_FLAG = 0b1000
LABEL_BITS = 4
HEADER_FIELDS: Tuple[Tuple[str, int], ...] = (
    ("version", 4),
    ("classes", 4),
    ("height", 16),
    ("width", 16),
    ("bank_size", 32),
    ("payload_bits", 32),
)
HEADER_BITS = sum(width for _, width in HEADER_FIELDS)
WEAK_CODES = {"none": 1, "rep3": 3}


@dataclass(frozen=True)
class CodecConfig:
    strong_repetition: int = 5
    weak_code: str = "none"
    run_length: bool = False

    def __post_init__(self) -> None:
        if self.strong_repetition < 1 or self.strong_repetition % 2 == 0:
            raise ConfigError(
                f"strong repetition must be odd and positive, got {self.strong_repetition}"
            )
        if self.weak_code not in WEAK_CODES:
            raise ConfigError(
                f"weak code must be one of {sorted(WEAK_CODES)}, got {self.weak_code!r}"
            )

    @property
    def weak_repetition(self) -> int:
        return WEAK_CODES[self.weak_code]

    @property
    def strong_correctable(self) -> int:
        return self.strong_repetition // 2


@dataclass(frozen=True)
class PacketLayout:
    """Bit spans of one coded packet (before byte padding)."""

    condition_bits: int
    index_bits: int
    strong_repetition: int
    weak_repetition: int

    @property
    def strong_span(self) -> Tuple[int, int]:
        return 0, (HEADER_BITS + self.condition_bits) * self.strong_repetition

    @property
    def index_span(self) -> Tuple[int, int]:
        start = self.strong_span[1]
        return start, start + self.index_bits * self.weak_repetition

    @property
    def total_bits(self) -> int:
        return self.index_span[1]


@dataclass(frozen=True)
class DecodeDiagnostics:
    strong_groups: int
    strong_corrected: int
    weak_groups: int
    weak_corrected: int
    index_raw: int
    index_wrapped: bool
    run_length: bool


def index_bit_width(N: int) -> int:
    """ceil(log2 N) bits; a single-entry bank needs none."""

    if N < 1:
        raise ConfigError(f"bank size must be >= 1, got {N}")
    return (int(N) - 1).bit_length()


def run_length_bit_width(W: int) -> int:
    return (int(W) - 1).bit_length()


def int_to_bits(value: int, width: int) -> Bits:
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((np.uint64(value) >> shifts) & np.uint64(1)).astype(np.uint8)


def bits_to_int(bits: Bits) -> int:
    value = 0
    for bit in np.asarray(bits, dtype=np.uint8):
        value = (value << 1) | int(bit)
    return value


def bits_to_bytes(bits: Bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def bytes_to_bits(data: bytes) -> Bits:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def repeat_encode(bits: Bits, r: int) -> Bits:
    return np.repeat(np.asarray(bits, dtype=np.uint8), r)


def repeat_decode(coded: Bits, r: int) -> Tuple[Bits, int]:
    """Majority vote per r-bit group; also returns how many groups held a minority bit."""

    groups = np.asarray(coded, dtype=np.uint8).reshape(-1, r)
    ones = groups.sum(axis=1)
    decoded = (ones > r // 2).astype(np.uint8)
    corrected = int(np.count_nonzero((ones != 0) & (ones != r)))
    return decoded, corrected


def serialize_condition(m: SemanticCondition, run_length: bool = False) -> Bits:
    labels = m.segmentation.astype(np.uint8)
    H, W = labels.shape
    if run_length:
        label_part = _encode_runs(labels)
    else:
        shifts = np.arange(LABEL_BITS - 1, -1, -1, dtype=np.uint8)
        label_part = ((labels.reshape(-1, 1) >> shifts) & 1).astype(np.uint8).reshape(-1)
    return np.concatenate([label_part, m.edges.astype(np.uint8).reshape(-1)])


def _encode_runs(labels: NDArray[np.uint8]) -> Bits:
    _, W = labels.shape
    length_bits = run_length_bit_width(W)
    chunks: List[Bits] = []
    for row in labels:
        starts = np.flatnonzero(np.r_[True, row[1:] != row[:-1]])
        lengths = np.diff(np.r_[starts, W])
        for start, length in zip(starts, lengths):
            chunks.append(int_to_bits(int(row[start]), LABEL_BITS))
            chunks.append(int_to_bits(int(length) - 1, length_bits))
    return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)


def _decode_runs(bits: Bits, H: int, W: int) -> Tuple[NDArray[np.uint8], int]:
    length_bits = run_length_bit_width(W)
    labels = np.zeros((H, W), dtype=np.uint8)
    offset = 0
    for row in range(H):
        col = 0
        while col < W:
            if offset + LABEL_BITS + length_bits > bits.size:
                raise PacketLostError("run-length payload ends mid-row")
            label = bits_to_int(bits[offset : offset + LABEL_BITS])
            length = bits_to_int(bits[offset + LABEL_BITS : offset + LABEL_BITS + length_bits]) + 1
            offset += LABEL_BITS + length_bits
            if col + length > W:
                raise PacketLostError(f"run of {length} overflows row {row}")
            labels[row, col : col + length] = label
            col += length
    return labels, offset


def deserialize_condition(
    bits: Bits, H: int, W: int, num_classes: int, run_length: bool
) -> SemanticCondition:
    bits = np.asarray(bits, dtype=np.uint8)
    if run_length:
        labels, used = _decode_runs(bits, H, W)
    else:
        used = H * W * LABEL_BITS
        if bits.size < used:
            raise PacketLostError("condition payload shorter than its label map")
        groups = bits[:used].reshape(-1, LABEL_BITS)
        weights = 1 << np.arange(LABEL_BITS - 1, -1, -1)
        labels = (groups @ weights).astype(np.uint8).reshape(H, W)
    if bits.size != used + H * W:
        raise PacketLostError(
            f"condition payload has {bits.size} bits, layout needs {used + H * W}"
        )
    if int(labels.max(initial=0)) >= num_classes:
        raise PacketLostError(f"decoded label {int(labels.max())} exceeds K={num_classes}")
    edges = bits[used:].reshape(H, W).copy()
    return SemanticCondition(segmentation=labels, edges=edges, num_classes=num_classes)


def _header_bits(m: SemanticCondition, N: int, payload_bits: int, run_length: bool) -> Bits:
    H, W = m.shape
    version = PACKET_VERSION | (RLE_FLAG if run_length else 0)
    values = (version, m.num_classes - 1, H, W, N, payload_bits)
    return np.concatenate(
        [int_to_bits(value, width) for value, (_, width) in zip(values, HEADER_FIELDS)]
    )


def _check_encodable(m: SemanticCondition, index: int, N: int) -> None:
    if not 1 <= m.num_classes <= MAX_CLASSES:
        raise ShapeError(f"K={m.num_classes} does not fit the 4-bit class field")
    H, W = m.shape
    if not (1 <= H < 1 << 16 and 1 <= W < 1 << 16):
        raise ShapeError(f"condition size {H}x{W} does not fit the 16-bit size fields")
    if not 1 <= N < 1 << 32:
        raise ConfigError(f"bank size {N} does not fit the 32-bit field")
    if not 0 <= index < N:
        raise ShapeError(f"index {index} outside [0, {N})")


def packet_layout(
    m: SemanticCondition, N: int, config: CodecConfig = CodecConfig()
) -> PacketLayout:
    return PacketLayout(
        condition_bits=int(serialize_condition(m, config.run_length).size),
        index_bits=index_bit_width(N),
        strong_repetition=config.strong_repetition,
        weak_repetition=config.weak_repetition,
    )


def encode_packet(
    m: SemanticCondition, index: int, N: int, config: CodecConfig = CodecConfig()
) -> Bits:
    """Coded packet bits (unpadded): strong(header + condition) then weak(index)."""

    index, N = int(index), int(N)
    _check_encodable(m, index, N)
    payload = serialize_condition(m, config.run_length)
    if payload.size >= 1 << 32:
        raise ShapeError("condition payload exceeds the 32-bit length field")
    strong = np.concatenate([_header_bits(m, N, int(payload.size), config.run_length), payload])
    weak = int_to_bits(index, index_bit_width(N))
    return np.concatenate(
        [
            repeat_encode(strong, config.strong_repetition),
            repeat_encode(weak, config.weak_repetition),
        ]
    )


def _read_header(bits: Bits) -> dict[str, int]:
    fields: dict[str, int] = {}
    offset = 0
    for name, width in HEADER_FIELDS:
        fields[name] = bits_to_int(bits[offset : offset + width])
        offset += width
    return fields


def decode_packet(
    bits: Bits, config: CodecConfig = CodecConfig()
) -> Tuple[SemanticCondition, int, DecodeDiagnostics]:
    """Recover (m, index); the index is reduced modulo N so it always names a bank entry.

    Trailing bits beyond the coded layout (byte padding) are ignored.
    """

    bits = np.asarray(bits, dtype=np.uint8)
    r = config.strong_repetition
    header_span = HEADER_BITS * r
    if bits.size < header_span:
        raise PacketLostError(f"packet of {bits.size} bits is shorter than its coded header")
    header_bits, header_corrected = repeat_decode(bits[:header_span], r)
    header = _read_header(header_bits)

    version = header["version"] & VERSION_MASK
    run_length = bool(header["version"] & RLE_FLAG)
    if version != PACKET_VERSION:
        raise PacketLostError(f"header unrecoverable: version {version}")
    K = header["classes"] + 1
    H, W, N, L = header["height"], header["width"], header["bank_size"], header["payload_bits"]
    if H < 1 or W < 1 or N < 1:
        raise PacketLostError(f"header unrecoverable: H={H} W={W} N={N}")
    if not run_length and L != H * W * (LABEL_BITS + 1):
        raise PacketLostError(f"header unrecoverable: payload length {L} for {H}x{W}")
    if run_length and L < H * W + H * (LABEL_BITS + run_length_bit_width(W)):
        raise PacketLostError(f"header unrecoverable: run-length payload {L} too short")

    layout = PacketLayout(
        condition_bits=L,
        index_bits=index_bit_width(N),
        strong_repetition=r,
        weak_repetition=config.weak_repetition,
    )
    if bits.size < layout.total_bits:
        raise PacketLostError(f"packet has {bits.size} bits, layout needs {layout.total_bits}")

    start, stop = header_span, layout.strong_span[1]
    payload, payload_corrected = repeat_decode(bits[start:stop], r)
    m = deserialize_condition(payload, H, W, K, run_length)

    start, stop = layout.index_span
    index_bits, weak_corrected = repeat_decode(bits[start:stop], config.weak_repetition)
    raw = bits_to_int(index_bits)
    index = raw % N
    if raw != index:
        logger.warning(f"Decoded index {raw} wrapped modulo N={N} to {index}")
    strong_corrected = header_corrected + payload_corrected
    if strong_corrected:
        logger.warning(f"Strong code corrected {strong_corrected} bit groups")

    diagnostics = DecodeDiagnostics(
        strong_groups=HEADER_BITS + L,
        strong_corrected=strong_corrected,
        weak_groups=layout.index_bits if config.weak_repetition > 1 else 0,
        weak_corrected=weak_corrected if config.weak_repetition > 1 else 0,
        index_raw=raw,
        index_wrapped=raw != index,
        run_length=run_length,
    )
    return m, index, diagnostics


def packet_to_bytes(bits: Bits) -> bytes:
    """Wire bytes: MSB-first, zero-padded to a byte boundary."""

    return bits_to_bytes(bits)


def packet_from_bytes(data: bytes) -> Bits:
    if not data:
        raise FormatError("packet file is empty")
    return bytes_to_bits(data)
