"""Conditional denoiser, optimizers, checkpoints and training primitives."""

from .checkpoint import (
    load_checkpoint,
    load_optimizer_state,
    save_checkpoint,
    save_optimizer_state,
)
from .denoiser import PREDICTIONS, ArchitectureConfig, DenoiserModel, time_features
from .optim import SGD, Adam, Optimizer, build_optimizer
from .training import (
    TrainBatch,
    gradient_check,
    loss_and_gradients,
    prepare_inputs,
    restricted_loss,
    train_step,
)

__all__ = [
    "Adam",
    "ArchitectureConfig",
    "DenoiserModel",
    "PREDICTIONS",
    "Optimizer",
    "SGD",
    "TrainBatch",
    "build_optimizer",
    "gradient_check",
    "load_checkpoint",
    "load_optimizer_state",
    "loss_and_gradients",
    "prepare_inputs",
    "restricted_loss",
    "save_checkpoint",
    "save_optimizer_state",
    "time_features",
    "train_step",
]
