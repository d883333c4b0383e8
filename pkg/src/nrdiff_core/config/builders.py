"""Turn a resolved RunConfig into the objects each subsystem consumes."""

from __future__ import annotations

from nrdiff_core.channel import ChannelModel, CodecConfig
from nrdiff_core.controller import TrainingConfig
from nrdiff_core.diffusion import NoiseSchedule, build_schedule, rescaled_bounds
from nrdiff_core.models import ArchitectureConfig
from nrdiff_core.pipeline import PipelineConfig
from nrdiff_core.semantics import NUM_CLASSES, SceneParams

from .run_config import RunConfig


def schedule_from(config: RunConfig) -> NoiseSchedule:
    beta_start, beta_end = config.beta_start, config.beta_end
    if config.beta_rescale and config.steps != config.beta_reference_steps:
        beta_start, beta_end = rescaled_bounds(
            config.steps, beta_start, beta_end, config.beta_reference_steps
        )
    return build_schedule(config.steps, "linear", beta_start, beta_end)


def architecture_from(config: RunConfig) -> ArchitectureConfig:
    return ArchitectureConfig(
        widths=tuple(config.model_widths),
        kernel=config.model_kernel,
        time_dim=config.time_embedding_dim,
        num_classes=NUM_CLASSES,
        zero_init_head=config.zero_init_head,
        prediction=config.model_prediction,
    )


def training_config_from(config: RunConfig) -> TrainingConfig:
    return TrainingConfig(
        target_score=config.target_score,
        check_interval=config.check_interval,
        validation_size=config.validation_size,
        max_steps=config.max_steps,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        optimizer=config.optimizer,
        seed=config.seed,
        bank_seed=config.bank_seed,
        bank_size=config.bank_size,
        noise_mode=config.noise_mode,
        schedule=schedule_from(config),
        architecture=architecture_from(config),
    )


def scene_params_from(config: RunConfig) -> SceneParams:
    return SceneParams(
        height=config.height,
        width=config.width,
        min_objects=config.min_objects,
        max_objects=config.max_objects,
    )


def codec_from(config: RunConfig) -> CodecConfig:
    return CodecConfig(weak_code=config.weak_code, run_length=config.run_length)


def pipeline_config_from(config: RunConfig) -> PipelineConfig:
    return PipelineConfig(
        codec=codec_from(config),
        rx_init=config.rx_init,
        corrupt_scope=config.corrupt_scope,
        edge_threshold=config.edge_threshold,
        num_classes=NUM_CLASSES,
        psnr_cap=config.psnr_cap,
    )


def channel_from(config: RunConfig) -> ChannelModel:
    return ChannelModel(p=config.channel_p, seed=config.seed)
