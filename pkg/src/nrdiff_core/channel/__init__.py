"""Dual-rate packet coding, the simulated channel and payload accounting."""

from .bsc import ChannelModel, flip_mask, transmit
from .codec import (
    HEADER_BITS,
    Bits,
    CodecConfig,
    DecodeDiagnostics,
    PacketLayout,
    bits_to_bytes,
    bytes_to_bits,
    decode_packet,
    encode_packet,
    index_bit_width,
    packet_from_bytes,
    packet_layout,
    packet_to_bytes,
    repeat_decode,
    repeat_encode,
    serialize_condition,
)
from .payload import PayloadReport, payload_report

__all__ = [
    "HEADER_BITS",
    "Bits",
    "ChannelModel",
    "CodecConfig",
    "DecodeDiagnostics",
    "PacketLayout",
    "PayloadReport",
    "bits_to_bytes",
    "bytes_to_bits",
    "decode_packet",
    "encode_packet",
    "flip_mask",
    "index_bit_width",
    "packet_from_bytes",
    "packet_layout",
    "packet_to_bytes",
    "payload_report",
    "repeat_decode",
    "repeat_encode",
    "serialize_condition",
    "transmit",
]
