"""Training controller configuration and the append-only training log."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from nrdiff_core.diffusion import NoiseSchedule, build_schedule, rescaled_bounds
from nrdiff_core.errors import ConfigError, FormatError
from nrdiff_core.models import ArchitectureConfig
from nrdiff_core.storage import read_csv_rows, write_csv

LOSS_COLUMNS = ("step", "loss")
CHECK_COLUMNS = ("step", "score", "stopped")

STOP_EARLY = "early-stop"
STOP_MAX_STEPS = "max-steps"
NOISE_MODES = ("bank", "gaussian")


def _default_schedule(steps: int = 100) -> NoiseSchedule:
    return build_schedule(steps, "linear", *rescaled_bounds(steps, 1e-4, 0.02))


@dataclass(frozen=True)
class TrainingConfig:
    target_score: float = 0.25
    check_interval: int = 1000
    validation_size: int = 16
    max_steps: int = 20000
    batch_size: int = 8
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    bank_seed: int = 1234
    bank_size: int = 1000
    noise_mode: str = "bank"
    schedule: NoiseSchedule = field(default_factory=lambda: _default_schedule())
    architecture: ArchitectureConfig = field(
        default_factory=lambda: ArchitectureConfig(prediction="x0")
    )

    def __post_init__(self) -> None:
        if self.check_interval < 1:
            raise ConfigError(f"check_interval must be >= 1, got {self.check_interval}")
        if self.validation_size < 1:
            raise ConfigError(f"validation_size must be >= 1, got {self.validation_size}")
        if math.isnan(self.target_score) or self.target_score < 0:
            raise ConfigError(f"target_score must be >= 0, got {self.target_score}")
        if self.max_steps < 0:
            raise ConfigError(f"max_steps must be >= 0, got {self.max_steps}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.bank_size < 1:
            raise ConfigError(f"bank_size must be >= 1, got {self.bank_size}")
        if self.noise_mode not in NOISE_MODES:
            raise ConfigError(f"noise_mode must be one of {NOISE_MODES}, got {self.noise_mode!r}")


@dataclass(frozen=True)
class CheckRecord:
    step: int
    score: float
    stopped: bool


@dataclass
class TrainingLog:
    """Per-step losses and per-check scores, appended in step order."""

    losses: List[float] = field(default_factory=list)
    checks: List[CheckRecord] = field(default_factory=list)
    stop_reason: Optional[str] = None

    @property
    def steps_run(self) -> int:
        return len(self.losses)

    @property
    def stop_step(self) -> int:
        if self.stop_reason == STOP_EARLY and self.checks:
            return self.checks[-1].step
        return self.steps_run

    @property
    def best_check(self) -> Optional[CheckRecord]:
        if not self.checks:
            return None
        return min(self.checks, key=lambda check: (check.score, check.step))

    def record_loss(self, step: int, loss: float) -> None:
        if step != len(self.losses) + 1:
            raise ConfigError(f"loss for step {step} recorded out of order")
        self.losses.append(float(loss))

    def record_check(self, step: int, score: float, stopped: bool) -> CheckRecord:
        if self.checks and step <= self.checks[-1].step:
            raise ConfigError(f"check at step {step} recorded out of order")
        check = CheckRecord(step=step, score=float(score), stopped=stopped)
        self.checks.append(check)
        return check

    def write(self, directory: Path) -> None:
        directory = Path(directory)
        write_csv(
            directory / "loss.csv",
            LOSS_COLUMNS,
            ({"step": step, "loss": loss} for step, loss in enumerate(self.losses, start=1)),
        )
        write_csv(
            directory / "checks.csv",
            CHECK_COLUMNS,
            (
                {"step": check.step, "score": check.score, "stopped": check.stopped}
                for check in self.checks
            ),
        )

    @classmethod
    def read(cls, directory: Path, stop_reason: Optional[str] = None) -> "TrainingLog":
        directory = Path(directory)
        try:
            loss_rows = read_csv_rows(directory / "loss.csv")
            check_rows = read_csv_rows(directory / "checks.csv")
            log = cls(stop_reason=stop_reason)
            for row in loss_rows:
                log.record_loss(int(row["step"]), float(row["loss"]))
            for row in check_rows:
                log.record_check(
                    int(row["step"]), float(row["score"]), row["stopped"].lower() == "true"
                )
        except (OSError, KeyError, ValueError) as exc:
            raise FormatError(f"training log in {directory}: {exc}") from exc
        return log
