"""Environment settings, run configuration and the builders that consume it."""

from .builders import (
    architecture_from,
    channel_from,
    codec_from,
    pipeline_config_from,
    scene_params_from,
    schedule_from,
    training_config_from,
)
from .run_config import RESOLVED_CONFIG_FILENAME, RunConfig
from .settings import Settings, get_settings, reset_settings_cache

__all__ = [
    "RESOLVED_CONFIG_FILENAME",
    "RunConfig",
    "Settings",
    "architecture_from",
    "channel_from",
    "codec_from",
    "get_settings",
    "pipeline_config_from",
    "reset_settings_cache",
    "scene_params_from",
    "schedule_from",
    "training_config_from",
]
