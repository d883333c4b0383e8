"""Transmitter, receiver and end-to-end runs."""

from .runs import (
    METADATA_FILENAME,
    METRICS_COLUMNS,
    end_to_end,
    evaluate_scenes,
    metrics_row,
    read_run_metadata,
    run_metadata,
    scene_channel,
    write_run_metadata,
)
from .transceiver import (
    RX_DROPPED_TERM,
    RX_ORACLE,
    PipelineConfig,
    RxResult,
    TxArtifacts,
    initial_latent,
    rx,
    tx,
)

__all__ = [
    "METADATA_FILENAME",
    "METRICS_COLUMNS",
    "RX_DROPPED_TERM",
    "RX_ORACLE",
    "PipelineConfig",
    "RxResult",
    "TxArtifacts",
    "end_to_end",
    "evaluate_scenes",
    "initial_latent",
    "metrics_row",
    "read_run_metadata",
    "run_metadata",
    "rx",
    "scene_channel",
    "tx",
    "write_run_metadata",
]
