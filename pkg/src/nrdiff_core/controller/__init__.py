"""Training controller: loop, validation scoring, early stop and resumable state."""

from .config import (
    STOP_EARLY,
    STOP_MAX_STEPS,
    CheckRecord,
    TrainingConfig,
    TrainingLog,
)
from .loop import (
    TrainingResult,
    evaluate_checkpoint,
    make_batch,
    regenerate_scene,
    run_training,
    should_stop,
)
from .state import ResumeState, load_training_state, save_training_state

__all__ = [
    "STOP_EARLY",
    "STOP_MAX_STEPS",
    "CheckRecord",
    "ResumeState",
    "TrainingConfig",
    "TrainingLog",
    "TrainingResult",
    "evaluate_checkpoint",
    "load_training_state",
    "make_batch",
    "regenerate_scene",
    "run_training",
    "save_training_state",
    "should_stop",
]
