"""Checkpoint and optimizer-state files."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.diffusion import NoiseSchedule
from nrdiff_core.errors import ConfigError, FormatError
from nrdiff_core.storage.binary import BinaryReader, BinaryWriter

from .denoiser import PREDICTIONS, ArchitectureConfig, DenoiserModel
from .optim import Optimizer, build_optimizer

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"DGN1"
CHECKPOINT_VERSION = 1
OPTIMIZER_MAGIC = b"OPT1"
OPTIMIZER_VERSION = 1

# Architecture block tags; widths use WIDTH_TAG_BASE + level.
TAG_IN_CHANNELS = 1
TAG_NUM_CLASSES = 2
TAG_TIME_DIM = 3
TAG_KERNEL = 4
TAG_ZERO_INIT_HEAD = 5
TAG_LEVELS = 6
TAG_PREDICTION = 7
WIDTH_TAG_BASE = 16

OPTIMIZER_KINDS = {"sgd": 0, "adam": 1}


def _architecture_fields(config: ArchitectureConfig) -> List[Tuple[int, int]]:
    fields = [
        (TAG_IN_CHANNELS, config.in_channels),
        (TAG_NUM_CLASSES, config.num_classes),
        (TAG_TIME_DIM, config.time_dim),
        (TAG_KERNEL, config.kernel),
        (TAG_ZERO_INIT_HEAD, int(config.zero_init_head)),
        (TAG_LEVELS, config.levels),
        (TAG_PREDICTION, PREDICTIONS.index(config.prediction)),
    ]
    fields.extend((WIDTH_TAG_BASE + level, width) for level, width in enumerate(config.widths))
    return fields


def _architecture_from_fields(fields: Dict[int, int]) -> ArchitectureConfig:
    required = (TAG_IN_CHANNELS, TAG_NUM_CLASSES, TAG_TIME_DIM, TAG_KERNEL, TAG_LEVELS)
    missing = [tag for tag in required if tag not in fields]
    if missing:
        raise FormatError(f"checkpoint: architecture block missing tags {missing}")
    levels = fields[TAG_LEVELS]
    try:
        widths = tuple(fields[WIDTH_TAG_BASE + level] for level in range(levels))
    except KeyError as exc:
        raise FormatError(f"checkpoint: missing width for level {exc}") from exc
    prediction = fields.get(TAG_PREDICTION, 0)
    if prediction >= len(PREDICTIONS):
        raise FormatError(f"checkpoint: unknown prediction kind {prediction}")
    try:
        return ArchitectureConfig(
            widths=widths,
            kernel=fields[TAG_KERNEL],
            time_dim=fields[TAG_TIME_DIM],
            in_channels=fields[TAG_IN_CHANNELS],
            num_classes=fields[TAG_NUM_CLASSES],
            zero_init_head=bool(fields.get(TAG_ZERO_INIT_HEAD, 1)),
            prediction=PREDICTIONS[prediction],
        )
    except ConfigError as exc:
        raise FormatError(f"checkpoint: invalid architecture: {exc}") from exc


def save_checkpoint(model: DenoiserModel, path: Path) -> Path:
    writer = BinaryWriter()
    writer.magic(CHECKPOINT_MAGIC)
    writer.u32(CHECKPOINT_VERSION)
    fields = _architecture_fields(model.config)
    writer.u32(len(fields))
    for tag, value in fields:
        writer.u32(tag)
        writer.u32(value)
    writer.u64(model.parameter_count)
    writer.f32_array(model.flat_parameters())
    path = Path(path)
    writer.write(path)
    logger.info(f"Wrote checkpoint ({model.parameter_count} parameters) to {path}")
    return path


def load_checkpoint(path: Path, schedule: Optional[NoiseSchedule] = None) -> DenoiserModel:
    """Model from ``path``; ``schedule`` is bound for x0-predicting checkpoints."""

    reader = BinaryReader.open(Path(path), "checkpoint")
    reader.expect_magic(CHECKPOINT_MAGIC)
    reader.expect_version((CHECKPOINT_VERSION,))
    field_count = reader.u32("architecture field count")
    fields: Dict[int, int] = {}
    for position in range(field_count):
        tag = reader.u32(f"architecture tag {position}")
        fields[tag] = reader.u32(f"architecture value {position}")
    config = _architecture_from_fields(fields)
    model = DenoiserModel(config, schedule=schedule)
    count = reader.u64("parameter count")
    if count != model.parameter_count:
        raise FormatError(
            f"checkpoint: {count} parameters stored, architecture needs {model.parameter_count}"
        )
    flat = reader.f32_array(count, "parameters")
    reader.expect_end()
    model.load_flat(flat)
    return model


def save_optimizer_state(optimizer: Optimizer, model: DenoiserModel, path: Path) -> Path:
    """Moments in the model's registration order (empty for plain descent)."""

    arrays = optimizer.state_arrays()
    writer = BinaryWriter()
    writer.magic(OPTIMIZER_MAGIC)
    writer.u32(OPTIMIZER_VERSION)
    writer.u32(OPTIMIZER_KINDS[optimizer.kind])
    writer.u64(optimizer.step_count)
    writer.u32(1 if arrays else 0)
    if arrays:
        for prefix in ("m:", "v:"):
            writer.f32_array(
                np.concatenate([arrays[prefix + key].reshape(-1) for key in model.parameters])
            )
    path = Path(path)
    writer.write(path)
    return path


def load_optimizer_state(path: Path, model: DenoiserModel) -> Optimizer:
    reader = BinaryReader.open(Path(path), "optimizer state")
    reader.expect_magic(OPTIMIZER_MAGIC)
    reader.expect_version((OPTIMIZER_VERSION,))
    kind_code = reader.u32("optimizer kind")
    kinds = {code: name for name, code in OPTIMIZER_KINDS.items()}
    if kind_code not in kinds:
        raise FormatError(f"optimizer state: unknown kind {kind_code}")
    optimizer = build_optimizer(kinds[kind_code])
    step_count = reader.u64("step count")
    has_moments = reader.u32("moment flag")
    arrays: Dict[str, NDArray[np.float32]] = {}
    if has_moments:
        shapes = model.parameter_shapes()
        for prefix in ("m:", "v:"):
            flat = reader.f32_array(model.parameter_count, f"{prefix[0]} moments")
            offset = 0
            for key, shape in shapes.items():
                size = int(np.prod(shape))
                arrays[prefix + key] = flat[offset : offset + size].reshape(shape)
                offset += size
    reader.expect_end()
    optimizer.load_state(step_count, arrays)
    return optimizer
