"""Bank file format (the one-time shared artifact)."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from nrdiff_core.errors import ConfigError, FormatError
from nrdiff_core.storage.binary import BinaryReader, BinaryWriter

from .noise_bank import NoiseBank, build_bank

logger = logging.getLogger(__name__)

BANK_MAGIC = b"NBK1"
BANK_VERSION = 1
MODE_SEED_ONLY = 0
MODE_FULL = 1
MODES = {"seed": MODE_SEED_ONLY, "full": MODE_FULL}


def save_bank(bank: NoiseBank, path: Path, mode: str = "full") -> Path:
    if mode not in MODES:
        raise ConfigError(f"unknown bank file mode: {mode}")
    writer = BinaryWriter()
    writer.magic(BANK_MAGIC)
    writer.u32(BANK_VERSION)
    writer.u8(MODES[mode])
    writer.u64(bank.seed)
    writer.u32(bank.size)
    writer.u32(len(bank.shape))
    for dim in bank.shape:
        writer.u32(dim)
    if MODES[mode] == MODE_FULL:
        writer.f32_array(bank.vectors.reshape(-1))
    path = Path(path)
    writer.write(path)
    logger.info(f"Wrote noise bank ({mode}) to {path}")
    return path


def load_bank(path: Path) -> NoiseBank:
    reader = BinaryReader.open(Path(path), "bank file")
    reader.expect_magic(BANK_MAGIC)
    reader.expect_version((BANK_VERSION,))
    mode = reader.u8("mode")
    if mode not in (MODE_SEED_ONLY, MODE_FULL):
        raise FormatError(f"bank file: unknown mode {mode}")
    seed = reader.u64("seed")
    size = reader.u32("N")
    rank = reader.u32("rank")
    if size < 1 or rank < 1:
        raise FormatError(f"bank file: invalid N={size} or rank={rank}")
    shape = tuple(reader.u32(f"dim {axis}") for axis in range(rank))
    if any(dim < 1 for dim in shape):
        raise FormatError(f"bank file: invalid shape {shape}")

    if mode == MODE_SEED_ONLY:
        reader.expect_end()
        return build_bank(seed, size, shape)

    count = size * int(np.prod(shape))
    vectors = reader.f32_array(count, "bank vectors").reshape((size,) + shape)
    reader.expect_end()
    vectors.setflags(write=False)
    return NoiseBank(seed=seed, size=size, shape=shape, vectors=vectors)
