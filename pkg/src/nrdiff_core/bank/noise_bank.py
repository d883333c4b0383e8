"""Pre-sampled noise bank shared once between transmitter and receiver."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


def _sub_seed(seed: int, index: int) -> int:
    return (int(seed) ^ int(index)) & SEED_MASK


def regenerate_vector(seed: int, index: int, shape: Tuple[int, ...]) -> NDArray[np.float32]:
    """Vector ``index`` of the bank with ``seed``; PCG64 seeded with seed XOR index."""

    generator = np.random.Generator(np.random.PCG64(_sub_seed(seed, index)))
    return generator.standard_normal(shape, dtype=np.float32)


@dataclass(frozen=True, eq=False)
class NoiseBank:
    """N unit-Gaussian float32 tensors regenerable from (seed, N, shape)."""

    seed: int
    size: int
    shape: Tuple[int, ...]
    vectors: NDArray[np.float32]

    @property
    def N(self) -> int:
        return self.size

    @property
    def dimension(self) -> int:
        return int(np.prod(self.shape))

    def check_index(self, index: int) -> int:
        if not 0 <= int(index) < self.size:
            raise ShapeError(f"bank index {index} outside [0, {self.size})")
        return int(index)

    def vector(self, index: int) -> NDArray[np.float32]:
        return self.vectors[self.check_index(index)]

    def __getitem__(self, index: int) -> NDArray[np.float32]:
        return self.vector(index)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NoiseBank):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.size == other.size
            and self.shape == other.shape
            and np.array_equal(self.vectors, other.vectors)
        )

    __hash__ = None  # type: ignore[assignment]


def build_bank(seed: int, N: int, shape: Tuple[int, ...]) -> NoiseBank:
    """Draw N standard-normal tensors, each from its own sub-seed."""

    shape = tuple(int(dim) for dim in shape)
    if int(N) < 1:
        raise ConfigError(f"noise bank needs N >= 1, got {N}")
    if not shape or any(dim < 1 for dim in shape):
        raise ConfigError(f"noise bank shape must be nonempty and positive, got {shape}")
    if not 0 <= int(seed) <= SEED_MASK:
        raise ConfigError(f"bank seed must fit in 64 bits, got {seed}")

    vectors = np.empty((int(N),) + shape, dtype=np.float32)
    for index in range(int(N)):
        vectors[index] = regenerate_vector(seed, index, shape)
    vectors.setflags(write=False)
    logger.debug(f"Built noise bank seed={seed} N={N} shape={shape}")
    return NoiseBank(seed=int(seed), size=int(N), shape=shape, vectors=vectors)


def draw_training_noise(
    bank: NoiseBank, rng: np.random.Generator
) -> Tuple[int, NDArray[np.float32]]:
    """Uniform bank index and its vector."""

    if bank.size < 1:
        raise ConfigError("cannot draw from an empty noise bank")
    index = int(rng.integers(0, bank.size))
    return index, bank.vector(index)


@dataclass(frozen=True)
class BankStatistics:
    mean: float
    variance: float
    entries: int


def bank_statistics(bank: NoiseBank) -> BankStatistics:
    values = bank.vectors.astype(np.float64)
    return BankStatistics(
        mean=float(values.mean()),
        variance=float(values.var()),
        entries=int(values.size),
    )
