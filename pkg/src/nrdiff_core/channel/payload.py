"""Payload accounting: what the wire carries versus sending the noised latent itself."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict

from nrdiff_core.semantics import SemanticCondition

from .codec import HEADER_BITS, CodecConfig, packet_layout

FLOAT_BITS = 32


@dataclass(frozen=True)
class PayloadReport:
    raw_latent_bits: int
    header_bits: int
    condition_bits: int
    index_bits: int
    coded_condition_bits: int
    coded_index_bits: int
    coded_total_bits: int
    wire_bytes: int

    @property
    def index_ratio(self) -> float:
        """Raw latent bits per index bit (a zero-bit index counts as one)."""

        return self.raw_latent_bits / max(self.index_bits, 1)

    @property
    def coded_ratio(self) -> float:
        return self.raw_latent_bits / self.coded_total_bits

    def as_dict(self) -> Dict[str, float]:
        row: Dict[str, float] = dict(asdict(self))
        row["index_ratio"] = self.index_ratio
        row["coded_ratio"] = self.coded_ratio
        return row


def payload_report(
    m: SemanticCondition, N: int, config: CodecConfig = CodecConfig(), channels: int = 3
) -> PayloadReport:
    """Sizes for a C x H x W latent sent as float32 versus this packet."""

    H, W = m.shape
    layout = packet_layout(m, N, config)
    start, stop = layout.index_span
    return PayloadReport(
        raw_latent_bits=channels * H * W * FLOAT_BITS,
        header_bits=HEADER_BITS,
        condition_bits=layout.condition_bits,
        index_bits=layout.index_bits,
        coded_condition_bits=layout.strong_span[1],
        coded_index_bits=stop - start,
        coded_total_bits=layout.total_bits,
        wire_bytes=(layout.total_bits + 7) // 8,
    )
