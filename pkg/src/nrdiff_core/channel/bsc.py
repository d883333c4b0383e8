"""Seeded binary symmetric channel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from nrdiff_core.errors import ConfigError

from .codec import Bits

CHANNEL_KINDS = ("binary-symmetric",)


@dataclass(frozen=True)
class ChannelModel:
    p: float = 0.0
    seed: int = 0
    kind: str = "binary-symmetric"

    def __post_init__(self) -> None:
        if self.kind not in CHANNEL_KINDS:
            raise ConfigError(f"unsupported channel kind {self.kind!r}")
        if not 0.0 <= self.p <= 0.5:
            raise ConfigError(f"crossover probability must lie in [0, 0.5], got {self.p}")


def flip_mask(length: int, channel: ChannelModel) -> Bits:
    rng = np.random.default_rng([int(channel.seed), length])
    return (rng.random(length) < channel.p).astype(np.uint8)


def transmit(
    bits: Bits, channel: ChannelModel, region: Optional[Tuple[int, int]] = None
) -> Bits:
    """Flip each bit independently with probability p; length is preserved.

    With ``region = (start, stop)`` only bits in that span can flip; the flip draws
    for the whole packet are made either way.
    """

    bits = np.asarray(bits, dtype=np.uint8)
    if channel.p == 0.0:
        return bits.copy()
    mask = flip_mask(bits.size, channel)
    if region is not None:
        start, stop = region
        keep = np.zeros_like(mask)
        keep[start:stop] = 1
        mask &= keep
    return bits ^ mask
