"""Variance schedules for the diffusion process."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

SCHEDULE_KINDS = ("linear",)


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """beta/alpha/alpha-bar tables for steps 1..T (stored 0-based)."""

    betas: NDArray[np.float64]
    alphas: NDArray[np.float64]
    alpha_bars: NDArray[np.float64]

    @property
    def T(self) -> int:
        return int(self.betas.shape[0])

    def check_step(self, t: int) -> int:
        if not 1 <= int(t) <= self.T:
            raise ShapeError(f"step {t} outside 1..{self.T}")
        return int(t)

    def beta(self, t: int) -> float:
        return float(self.betas[self.check_step(t) - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self.check_step(t) - 1])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[self.check_step(t) - 1])


def build_schedule(
    T: int,
    kind: str = "linear",
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
) -> NoiseSchedule:
    """Linear schedule with betas interpolated from beta_start to beta_end inclusive."""

    if kind not in SCHEDULE_KINDS:
        raise ConfigError(f"unknown schedule kind: {kind}")
    if int(T) < 1:
        raise ConfigError(f"schedule needs T >= 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ConfigError(
            f"betas must satisfy 0 < beta_start <= beta_end < 1 (got {beta_start}, {beta_end})"
        )

    betas = np.linspace(beta_start, beta_end, int(T), dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.empty_like(alphas)
    running = 1.0
    for i, alpha in enumerate(alphas):
        running = running * float(alpha)
        alpha_bars[i] = running

    for table in (betas, alphas, alpha_bars):
        table.setflags(write=False)
    logger.debug(f"Built {kind} schedule T={T} alpha_bar_T={alpha_bars[-1]:.3e}")
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=alpha_bars)


def rescaled_bounds(
    T: int,
    beta_start: float,
    beta_end: float,
    reference_steps: int = 1000,
) -> Tuple[float, float]:
    """Scale reference-T beta bounds to a different step count, keeping total noise comparable."""

    if int(T) < 1 or int(reference_steps) < 1:
        raise ConfigError("step counts must be >= 1")
    scale = reference_steps / int(T)
    ceiling = float(np.nextafter(1.0, 0.0))
    return min(beta_start * scale, ceiling), min(beta_end * scale, ceiling)
