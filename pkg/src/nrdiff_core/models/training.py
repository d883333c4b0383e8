"""Restricted denoising loss, its gradients, one training step and gradient checking."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.bank import NoiseBank
from nrdiff_core.diffusion import NoiseSchedule, forward_diffuse, nr_forward_diffuse
from nrdiff_core.errors import ShapeError, TrainingDivergedError

from .denoiser import DenoiserModel
from .layers import Array, Grads
from .optim import Optimizer, is_finite_mapping

logger = logging.getLogger(__name__)

RELATIVE_ERROR_FLOOR = 1e-7


@dataclass(frozen=True, eq=False)
class TrainBatch:
    """x0 batch, condition tensors, per-example steps and bank indices.

    ``noise`` replaces the bank vectors when set (unrestricted baseline training).
    """

    x0: Array
    conditions: Array
    steps: NDArray[np.int64]
    indices: NDArray[np.int64]
    noise: Optional[Array] = None

    def __post_init__(self) -> None:
        B = self.x0.shape[0]
        if self.x0.ndim != 4:
            raise ShapeError(f"x0 batch must be B x C x H x W, got {self.x0.shape}")
        if self.conditions.shape[0] != B or self.steps.shape != (B,) or self.indices.shape != (B,):
            raise ShapeError(
                f"batch dimensions disagree: x0 {self.x0.shape}, conditions "
                f"{self.conditions.shape}, steps {self.steps.shape}, indices {self.indices.shape}"
            )
        if self.noise is not None and self.noise.shape != self.x0.shape:
            raise ShapeError(f"noise {self.noise.shape} does not match x0 {self.x0.shape}")

    def __len__(self) -> int:
        return int(self.x0.shape[0])


def restricted_loss(target: Array, predicted: Array) -> float:
    """Mean squared error over every element."""

    target = np.asarray(target, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if target.shape != predicted.shape:
        raise ShapeError(f"target {target.shape} and prediction {predicted.shape} differ")
    return float(np.mean(np.square(predicted - target)))


def restricted_loss_gradient(target: Array, predicted: Array) -> Array:
    return 2.0 * (predicted - target) / predicted.size


def prepare_inputs(
    batch: TrainBatch, bank: NoiseBank, schedule: NoiseSchedule
) -> Tuple[Array, Array]:
    """Noised inputs x_t and the noise targets for each example."""

    x_t: List[Array] = []
    targets: List[Array] = []
    for b in range(len(batch)):
        t = int(batch.steps[b])
        if batch.noise is None:
            index = int(batch.indices[b])
            x_t.append(nr_forward_diffuse(batch.x0[b], t, bank, index, schedule))
            targets.append(bank.vector(index).astype(np.float64))
        else:
            x_t.append(forward_diffuse(batch.x0[b], t, batch.noise[b], schedule))
            targets.append(np.asarray(batch.noise[b], dtype=np.float64))
    return np.stack(x_t), np.stack(targets)


def loss_and_gradients(
    model: DenoiserModel, x_t: Array, steps: NDArray[np.int64], cond: Array, target: Array
) -> Tuple[float, Grads]:
    predicted, cache = model.forward(x_t, steps, cond)
    loss = restricted_loss(target, predicted)
    grads = model.backward(cache, restricted_loss_gradient(target, predicted))
    return loss, grads


def train_step(
    model: DenoiserModel,
    batch: TrainBatch,
    bank: NoiseBank,
    schedule: NoiseSchedule,
    optimizer: Optimizer,
    learning_rate: float,
    step: Optional[int] = None,
) -> float:
    """One descent update on ``model``; returns the pre-update loss."""

    x_t, target = prepare_inputs(batch, bank, schedule)
    loss, grads = loss_and_gradients(model, x_t, batch.steps, batch.conditions, target)
    if not math.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss {loss}", step=step)
    updated = optimizer.update(model.parameters, grads, learning_rate)
    if not is_finite_mapping(updated):
        optimizer.discard()
        raise TrainingDivergedError("non-finite parameters after update", step=step)
    optimizer.commit()
    model.parameters = updated
    return loss


def _sample_coordinates(
    model: DenoiserModel, count: int, rng: np.random.Generator
) -> List[Tuple[str, int]]:
    """At least one coordinate from every tensor, the rest uniform over all parameters."""

    keys = list(model.parameters)
    sizes = np.array([model.parameters[key].size for key in keys])
    picks = {(key, int(rng.integers(size))) for key, size in zip(keys, sizes)}
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    target = min(max(count, len(keys)), total)
    while len(picks) < target:
        flat = int(rng.integers(total))
        tensor = int(np.searchsorted(offsets, flat, side="right") - 1)
        picks.add((keys[tensor], flat - int(offsets[tensor])))
    return sorted(picks, key=lambda item: (keys.index(item[0]), item[1]))


def gradient_check(
    model: DenoiserModel,
    batch: TrainBatch,
    bank: NoiseBank,
    schedule: NoiseSchedule,
    epsilon_fd: float = 1e-3,
    num_coordinates: int = 100,
    seed: int = 0,
) -> float:
    """Largest relative error between analytic and central-difference gradients.

    Runs on a float64 copy of ``model``. The relative error of one coordinate is
    |a - n| / max(|a| + |n|, 1e-7), so a pair of zero gradients agrees at 0.
    """

    shadow = model.copy(np.float64)
    x_t, target = prepare_inputs(batch, bank, schedule)
    _, grads = loss_and_gradients(shadow, x_t, batch.steps, batch.conditions, target)

    def loss_at() -> float:
        predicted, _ = shadow.forward(x_t, batch.steps, batch.conditions)
        return restricted_loss(target, predicted)

    worst = 0.0
    per_tensor: Dict[str, float] = {}
    rng = np.random.default_rng([int(seed), 0x6763])
    for key, flat_index in _sample_coordinates(shadow, num_coordinates, rng):
        tensor = shadow.parameters[key].reshape(-1)
        original = float(tensor[flat_index])
        tensor[flat_index] = original + epsilon_fd
        plus = loss_at()
        tensor[flat_index] = original - epsilon_fd
        minus = loss_at()
        tensor[flat_index] = original
        numeric = (plus - minus) / (2.0 * epsilon_fd)
        analytic = float(np.asarray(grads[key]).reshape(-1)[flat_index])
        error = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), RELATIVE_ERROR_FLOOR)
        per_tensor[key] = max(per_tensor.get(key, 0.0), error)
        worst = max(worst, error)
    for key, error in per_tensor.items():
        logger.debug(f"gradient check {key}: max relative error {error:.3e}")
    return worst
