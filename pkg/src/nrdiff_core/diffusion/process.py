"""Forward (standard and noise-restricted) and reverse diffusion."""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, Any, Optional, Protocol

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import ShapeError

from .schedule import NoiseSchedule

if TYPE_CHECKING:
    from nrdiff_core.bank import NoiseBank

logger = logging.getLogger(__name__)

ImageTensor = NDArray[np.float64]


class NoisePredictor(Protocol):
    """Anything that predicts the noise contained in x_t given step t and condition m."""

    def predict_noise(self, x_t: ImageTensor, t: int, m: Any) -> ImageTensor: ...


def forward_diffuse(
    x0: ImageTensor,
    t: int,
    epsilon: ImageTensor,
    schedule: NoiseSchedule,
) -> ImageTensor:
    """x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * epsilon."""

    x0 = np.asarray(x0, dtype=np.float64)
    epsilon = np.asarray(epsilon, dtype=np.float64)
    if x0.shape != epsilon.shape:
        raise ShapeError(f"noise shape {epsilon.shape} does not match image shape {x0.shape}")
    alpha_bar = schedule.alpha_bar(t)
    return math.sqrt(alpha_bar) * x0 + math.sqrt(1.0 - alpha_bar) * epsilon


def nr_forward_diffuse(
    x0: ImageTensor,
    t: int,
    bank: "NoiseBank",
    index: int,
    schedule: NoiseSchedule,
) -> ImageTensor:
    """Forward diffusion whose noise is the bank vector at ``index``."""

    return forward_diffuse(x0, t, bank.vector(index), schedule)


def reverse_step(
    x_t: ImageTensor,
    t: int,
    predicted_noise: ImageTensor,
    schedule: NoiseSchedule,
    fresh_noise: Optional[ImageTensor] = None,
) -> ImageTensor:
    """One ancestral step x_t -> x_{t-1} with sigma_t^2 = beta_t."""

    if int(t) < 1:
        raise ShapeError(f"cannot reverse step {t}; nothing to reverse")
    x_t = np.asarray(x_t, dtype=np.float64)
    predicted_noise = np.asarray(predicted_noise, dtype=np.float64)
    if predicted_noise.shape != x_t.shape:
        raise ShapeError(
            f"predicted noise shape {predicted_noise.shape} does not match {x_t.shape}"
        )

    beta = schedule.beta(t)
    alpha = schedule.alpha(t)
    alpha_bar = schedule.alpha_bar(t)
    mean = (x_t - (beta / math.sqrt(1.0 - alpha_bar)) * predicted_noise) / math.sqrt(alpha)

    if t == 1 or fresh_noise is None:
        return mean
    fresh_noise = np.asarray(fresh_noise, dtype=np.float64)
    if fresh_noise.shape != x_t.shape:
        raise ShapeError(f"fresh noise shape {fresh_noise.shape} does not match {x_t.shape}")
    return mean + math.sqrt(beta) * fresh_noise


def reconstruct_x0(
    x_t: ImageTensor,
    t: int,
    epsilon: ImageTensor,
    schedule: NoiseSchedule,
) -> ImageTensor:
    """Invert the closed-form forward step for a known noise vector."""

    alpha_bar = schedule.alpha_bar(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    return (x_t - math.sqrt(1.0 - alpha_bar) * np.asarray(epsilon, dtype=np.float64)) / math.sqrt(
        alpha_bar
    )


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from a tuple of integers."""

    return int(np.random.SeedSequence([int(part) for part in parts]).generate_state(1)[0])


def fresh_noise_for_step(rng_seed: int, element: int, t: int, shape: tuple) -> ImageTensor:
    return np.random.default_rng([int(rng_seed), int(element), int(t)]).standard_normal(shape)


def sample(
    model: NoisePredictor,
    m: Any,
    x_T: ImageTensor,
    schedule: NoiseSchedule,
    rng_seed: int,
) -> ImageTensor:
    """Run reverse steps T..1 conditioned on ``m``; result clamped to [-1, 1].

    ``x_T`` may be a single C x H x W tensor or a batch; batch element b draws its
    fresh noise from seed (rng_seed, b, t), so element 0 matches an unbatched call.
    """

    x = np.array(x_T, dtype=np.float64)
    batched = x.ndim == 4
    if x.ndim not in (3, 4):
        raise ShapeError(f"expected C x H x W or B x C x H x W, got shape {x.shape}")

    for t in range(schedule.T, 0, -1):
        predicted = model.predict_noise(x, t, m)
        fresh = None
        if t > 1:
            if batched:
                fresh = np.stack(
                    [fresh_noise_for_step(rng_seed, b, t, x.shape[1:]) for b in range(x.shape[0])]
                )
            else:
                fresh = fresh_noise_for_step(rng_seed, 0, t, x.shape)
        x = reverse_step(x, t, predicted, schedule, fresh)

    if not np.all(np.isfinite(x)):
        logger.warning("Reverse diffusion produced non-finite values; clamping to range")
        x = np.nan_to_num(x, nan=0.0, posinf=1.0, neginf=-1.0)
    return np.clip(x, -1.0, 1.0)
