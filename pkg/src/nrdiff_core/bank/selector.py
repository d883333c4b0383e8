"""Gaussian-radius matching over the noise bank (the TX-side noise selector)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from nrdiff_core.diffusion import ImageTensor, NoiseSchedule, forward_diffuse
from nrdiff_core.errors import ShapeError

from .noise_bank import NoiseBank

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadiusReport:
    per_index_radius: Tuple[float, ...]
    theoretical_radius: float
    best_index: int

    @property
    def best_radius(self) -> float:
        return self.per_index_radius[self.best_index]


def gaussian_radius(x: ImageTensor) -> float:
    """Euclidean norm of the flattened tensor.

    Squares are summed in sorted order so the value is exactly invariant under
    permutation of the entries.
    """

    squares = np.sort(np.square(np.asarray(x, dtype=np.float64)).ravel())
    return math.sqrt(float(np.sum(squares)))


def theoretical_radius(shape: Sequence[int]) -> float:
    """sqrt(d) * (1 - 1/(4d)), the large-d expansion of E||z|| for z ~ N(0, I_d)."""

    d = int(np.prod(tuple(shape))) if len(shape) else 0
    if d < 1:
        raise ShapeError(f"theoretical radius needs dimension >= 1, got shape {tuple(shape)}")
    return math.sqrt(d) * (1.0 - 1.0 / (4.0 * d))


def select_noise(bank: NoiseBank, x0: ImageTensor, schedule: NoiseSchedule) -> RadiusReport:
    """Pick the bank index whose step-T latent radius is closest to the theoretical one.

    Ties resolve to the smallest index.
    """

    x0 = np.asarray(x0, dtype=np.float64)
    if tuple(x0.shape) != bank.shape:
        raise ShapeError(f"image shape {x0.shape} does not match bank shape {bank.shape}")

    target = theoretical_radius(bank.shape)
    radii = []
    best_index = 0
    best_gap = math.inf
    for index in range(bank.size):
        latent = forward_diffuse(x0, schedule.T, bank.vector(index), schedule)
        radius = gaussian_radius(latent)
        radii.append(radius)
        gap = abs(radius - target)
        if gap < best_gap:
            best_gap = gap
            best_index = index

    logger.debug(
        f"Selected bank index {best_index} radius={radii[best_index]:.4f} target={target:.4f}"
    )
    return RadiusReport(
        per_index_radius=tuple(radii),
        theoretical_radius=target,
        best_index=best_index,
    )
