"""Resumable training state: checkpoints, optimizer moments, log and a key=value sidecar."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import dotenv_values

from nrdiff_core.diffusion import NoiseSchedule
from nrdiff_core.errors import FormatError
from nrdiff_core.models import (
    DenoiserModel,
    Optimizer,
    load_checkpoint,
    load_optimizer_state,
    save_checkpoint,
    save_optimizer_state,
)

from .config import TrainingLog

logger = logging.getLogger(__name__)

LATEST_CHECKPOINT = "latest.dgn"
BEST_CHECKPOINT = "best.dgn"
OPTIMIZER_STATE = "optimizer.opt"
STATE_SIDECAR = "state.env"


@dataclass(frozen=True)
class ResumeState:
    model: DenoiserModel
    optimizer: Optimizer
    log: TrainingLog
    step: int
    best_score: Optional[float]


def save_training_state(
    directory: Path,
    model: DenoiserModel,
    optimizer: Optimizer,
    log: TrainingLog,
    step: int,
    new_best: bool,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, directory / LATEST_CHECKPOINT)
    if new_best:
        save_checkpoint(model, directory / BEST_CHECKPOINT)
    save_optimizer_state(optimizer, model, directory / OPTIMIZER_STATE)
    log.write(directory)
    best = log.best_check
    lines = [
        f"step={step}",
        f"optimizer={optimizer.kind}",
        f"stop_reason={log.stop_reason or ''}",
        f"best_score={'' if best is None else repr(best.score)}",
        f"best_step={'' if best is None else best.step}",
    ]
    (directory / STATE_SIDECAR).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_training_state(
    directory: Path, schedule: Optional[NoiseSchedule] = None
) -> ResumeState:
    directory = Path(directory)
    sidecar = directory / STATE_SIDECAR
    if not sidecar.exists():
        raise FormatError(f"no training state in {directory} (missing {STATE_SIDECAR})")
    values = dotenv_values(sidecar)
    try:
        step = int(values.get("step") or "")
    except ValueError as exc:
        raise FormatError(f"{sidecar}: invalid step") from exc
    model = load_checkpoint(directory / LATEST_CHECKPOINT, schedule)
    optimizer = load_optimizer_state(directory / OPTIMIZER_STATE, model)
    log = TrainingLog.read(directory, stop_reason=values.get("stop_reason") or None)
    if log.steps_run != step:
        raise FormatError(f"{sidecar}: step {step} but the loss log has {log.steps_run} rows")
    best = log.best_check
    logger.info(f"Resuming training from step {step} in {directory}")
    return ResumeState(
        model=model,
        optimizer=optimizer,
        log=log,
        step=step,
        best_score=None if best is None else best.score,
    )
