"""Training loop with periodic validation scoring and early stopping."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from nrdiff_core.analytics.quality import perceptual_proxy
from nrdiff_core.bank import NoiseBank, build_bank, draw_training_noise, select_noise
from nrdiff_core.diffusion import NoiseSchedule, derive_seed, sample
from nrdiff_core.errors import ConfigError
from nrdiff_core.models import DenoiserModel, TrainBatch, build_optimizer, train_step
from nrdiff_core.semantics import SceneDataset

from .config import STOP_EARLY, STOP_MAX_STEPS, TrainingConfig, TrainingLog
from .state import load_training_state, save_training_state

logger = logging.getLogger(__name__)

EPOCH_TAG = 0x45
STEP_TAG = 0x53
VALIDATION_TAG = 0x56

Scorer = Callable[[DenoiserModel, NoiseBank, NoiseSchedule, SceneDataset, int], float]


@dataclass
class TrainingResult:
    model: DenoiserModel
    bank: NoiseBank
    log: TrainingLog


def should_stop(score: float, threshold: float) -> bool:
    return score <= threshold


def regenerate_scene(
    model: DenoiserModel,
    bank: NoiseBank,
    schedule: NoiseSchedule,
    validation: SceneDataset,
    position: int,
    seed: int,
) -> np.ndarray:
    """Select noise for one scene, then sample from x_T = sqrt(1 - alpha_bar_T) * eps."""

    x0 = validation.images[position]
    report = select_noise(bank, x0, schedule)
    x_T = math.sqrt(1.0 - schedule.alpha_bar(schedule.T)) * bank.vector(report.best_index)
    rng_seed = derive_seed(seed, VALIDATION_TAG, validation.seeds[position])
    return sample(model, validation.conditions[position], x_T, schedule, rng_seed)


def evaluate_checkpoint(
    model: DenoiserModel,
    bank: NoiseBank,
    schedule: NoiseSchedule,
    validation: SceneDataset,
    seed: int,
    threads: int = 1,
) -> float:
    """Mean perceptual proxy between each validation scene and its regeneration."""

    if len(validation) < 1:
        raise ConfigError("validation set must hold at least one scene")

    def score(position: int) -> float:
        regenerated = regenerate_scene(model, bank, schedule, validation, position, seed)
        return perceptual_proxy(validation.images[position], regenerated)

    positions = range(len(validation))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(score, positions))
    else:
        scores = [score(position) for position in positions]
    return float(np.mean(scores))


def make_batch(
    dataset: SceneDataset, config: TrainingConfig, bank: NoiseBank, step: int
) -> TrainBatch:
    """Batch for a 1-based step, derived only from (seed, step) so resume needs no RNG state."""

    n = len(dataset)
    per_epoch = math.ceil(n / config.batch_size)
    epoch, position = divmod(step - 1, per_epoch)
    order = np.random.default_rng([config.seed, EPOCH_TAG, epoch]).permutation(n)
    members = order[position * config.batch_size : (position + 1) * config.batch_size]

    rng = np.random.default_rng([config.seed, STEP_TAG, step])
    steps = rng.integers(1, config.schedule.T + 1, size=len(members))
    x0 = dataset.images[members]
    noise = None
    if config.noise_mode == "bank":
        indices = np.array([draw_training_noise(bank, rng)[0] for _ in members], dtype=np.int64)
    else:
        indices = np.zeros(len(members), dtype=np.int64)
        noise = rng.standard_normal(x0.shape)
    return TrainBatch(
        x0=x0,
        conditions=dataset.condition_tensors(members),
        steps=steps.astype(np.int64),
        indices=indices,
        noise=noise,
    )


def run_training(
    dataset: SceneDataset,
    config: TrainingConfig,
    validation: Optional[SceneDataset] = None,
    scorer: Optional[Scorer] = None,
    resume_from: Optional[Path] = None,
    checkpoint_dir: Optional[Path] = None,
    threads: int = 1,
) -> TrainingResult:
    """Train until the validation score reaches the target or max_steps runs out.

    Without an explicit ``validation`` set the last ``validation_size`` scenes of
    ``dataset`` are held out. Checks run every ``check_interval`` steps; the
    state is checkpointed at each check and at the end when ``checkpoint_dir``
    is set.
    """

    if len(dataset) < 1:
        raise ConfigError("training dataset is empty")
    if validation is None:
        dataset, validation = dataset.split(config.validation_size)
    if scorer is None:
        scorer = partial(evaluate_checkpoint, threads=threads)

    bank = build_bank(config.bank_seed, config.bank_size, dataset.image_shape)
    schedule = config.schedule

    start = 0
    best_score = math.inf
    if resume_from is not None:
        state = load_training_state(resume_from, schedule)
        model, optimizer, log, start = state.model, state.optimizer, state.log, state.step
        if model.config != config.architecture:
            raise ConfigError("resumed checkpoint architecture differs from the configuration")
        log.stop_reason = None
        if state.best_score is not None:
            best_score = state.best_score
    else:
        model = DenoiserModel(config.architecture, seed=config.seed, schedule=schedule)
        optimizer = build_optimizer(config.optimizer)
        log = TrainingLog()

    logger.info(
        f"Training {model.parameter_count} parameters on {len(dataset)} scenes "
        f"(N={bank.N}, T={schedule.T}, steps {start + 1}..{config.max_steps})"
    )
    step = start
    for step in range(start + 1, config.max_steps + 1):
        batch = make_batch(dataset, config, bank, step)
        loss = train_step(
            model, batch, bank, schedule, optimizer, config.learning_rate, step=step
        )
        log.record_loss(step, loss)
        logger.debug(f"step {step}: loss {loss:.6f}")

        if step % config.check_interval:
            continue
        score = scorer(model, bank, schedule, validation, config.seed)
        stop = should_stop(score, config.target_score)
        log.record_check(step, score, stop)
        logger.info(f"check at step {step}: score {score:.4f} (target {config.target_score})")
        if stop:
            log.stop_reason = STOP_EARLY
        if checkpoint_dir is not None:
            save_training_state(checkpoint_dir, model, optimizer, log, step, score < best_score)
        best_score = min(best_score, score)
        if stop:
            logger.info(f"Early stop at step {step}")
            break
    else:
        log.stop_reason = STOP_MAX_STEPS

    if checkpoint_dir is not None and log.stop_reason == STOP_MAX_STEPS:
        save_training_state(checkpoint_dir, model, optimizer, log, step, not log.checks)
    return TrainingResult(model=model, bank=bank, log=log)
