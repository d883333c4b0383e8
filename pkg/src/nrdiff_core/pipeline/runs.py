"""End-to-end runs: tx -> channel -> rx -> metrics, one scene or a whole set."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from dotenv import dotenv_values
from numpy.typing import NDArray

from nrdiff_core.analytics.quality import perceptual_proxy, psnr
from nrdiff_core.bank import NoiseBank
from nrdiff_core.channel import ChannelModel, packet_layout, transmit
from nrdiff_core.diffusion import NoisePredictor, NoiseSchedule, derive_seed
from nrdiff_core.errors import NRDiffError, StageError
from nrdiff_core.semantics import SceneDataset
from nrdiff_core.storage import ResultSink
from nrdiff_core.telemetry import StageTracker, track_stage

from .transceiver import PipelineConfig, RxResult, TxArtifacts, rx, tx

logger = logging.getLogger(__name__)

METRICS_COLUMNS = (
    "scene_id",
    "seed",
    "N",
    "p",
    "index_tx",
    "index_rx",
    "proxy",
    "psnr",
    "payload_bits_condition",
    "payload_bits_index",
    "stop_step",
)
METADATA_FILENAME = "run_metadata.env"

CHANNEL_TAG = 0x43
SAMPLER_TAG = 0x52

# Scores recorded for a lost packet.
LOST_PROXY = 1.0
LOST_PSNR = 0.0
LOST_INDEX = -1


def corruption_region(
    artifacts: TxArtifacts, N: int, config: PipelineConfig
) -> Optional[Tuple[int, int]]:
    if config.corrupt_scope == "all":
        return None
    return packet_layout(artifacts.condition, N, config.codec).index_span


def metrics_row(
    scene_id: int,
    seed: int,
    N: int,
    p: float,
    index_tx: int,
    condition_bits: int,
    index_bits: int,
    result: RxResult,
    source: NDArray[np.float64],
    psnr_cap: float = 100.0,
    stop_step: int = 0,
) -> Dict[str, Any]:
    """One metrics CSV row; a lost packet scores the worst proxy and zero PSNR."""

    if result.image is not None:
        proxy = perceptual_proxy(source, result.image)
        peak_snr = psnr(source, result.image, cap=psnr_cap)
        index_rx = int(result.index) if result.index is not None else LOST_INDEX
    else:
        proxy, peak_snr, index_rx = LOST_PROXY, LOST_PSNR, LOST_INDEX
    return {
        "scene_id": int(scene_id),
        "seed": int(seed),
        "N": int(N),
        "p": float(p),
        "index_tx": int(index_tx),
        "index_rx": index_rx,
        "proxy": float(proxy),
        "psnr": float(peak_snr),
        "payload_bits_condition": int(condition_bits),
        "payload_bits_index": int(index_bits),
        "stop_step": int(stop_step),
    }


def end_to_end(
    scene_id: int,
    image: NDArray[np.float64],
    labels: NDArray[np.uint8],
    bank: NoiseBank,
    model: NoisePredictor,
    schedule: NoiseSchedule,
    channel: ChannelModel,
    config: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    stop_step: int = 0,
    tracker: Optional[StageTracker] = None,
) -> Tuple[RxResult, Dict[str, Any]]:
    """One scene through the whole system; deterministic given ``seed`` and ``channel.seed``.

    Failures inside a stage are re-raised as StageError carrying the stage label.
    """

    tracker = tracker or StageTracker("end_to_end")
    stage = "tx"
    try:
        with track_stage(tracker, stage):
            artifacts = tx(image, labels, bank, schedule, config)
        stage = "channel"
        with track_stage(tracker, stage):
            received = transmit(
                artifacts.bits, channel, corruption_region(artifacts, bank.N, config)
            )
        stage = "rx"
        with track_stage(tracker, stage):
            result = rx(
                received,
                bank,
                model,
                schedule,
                config,
                rng_seed=derive_seed(seed, SAMPLER_TAG, scene_id),
                oracle_x_T=artifacts.x_T if config.rx_init == "oracle" else None,
            )
        stage = "metrics"
        with track_stage(tracker, stage):
            row = metrics_row(
                scene_id,
                seed,
                bank.N,
                channel.p,
                artifacts.index,
                artifacts.payload.condition_bits,
                artifacts.payload.index_bits,
                result,
                image,
                config.psnr_cap,
                stop_step,
            )
    except NRDiffError as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, exc) from exc

    tracker.update_metadata({"scene_id": int(scene_id), "rx_init": config.rx_init})
    if not result.completed:
        tracker.record_error("rx", result.error or "packet lost")
    timings = {**tracker.timings_ms, **{f"rx.{k}": v for k, v in result.timings_ms.items()}}
    logger.debug(f"scene {scene_id} stage timings (ms): {timings}")
    return replace(result, timings_ms=timings), row


def scene_channel(channel: ChannelModel, seed: int, scene_id: int) -> ChannelModel:
    """Independent per-scene flip pattern derived from the run seed."""

    return replace(channel, seed=derive_seed(seed, CHANNEL_TAG, channel.seed, scene_id))


def evaluate_scenes(
    scenes: SceneDataset,
    bank: NoiseBank,
    model: NoisePredictor,
    schedule: NoiseSchedule,
    channel: ChannelModel,
    config: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    stop_step: int = 0,
    threads: int = 1,
    sink: Optional[ResultSink] = None,
    run_records: Optional[ResultSink] = None,
    first_id: int = 0,
) -> List[Dict[str, Any]]:
    """Run every scene; rows come back (and reach ``sink``) in scene order.

    Scene ids are ``first_id + position``; they seed the channel and the sampler.
    """

    def run_one(position: int) -> Tuple[Dict[str, Any], StageTracker]:
        tracker = StageTracker("end_to_end")
        scene_id = first_id + position
        _, row = end_to_end(
            scene_id,
            scenes.images[position],
            scenes.labels[position],
            bank,
            model,
            schedule,
            scene_channel(channel, seed, scene_id),
            config,
            seed,
            stop_step,
            tracker,
        )
        return row, tracker

    positions = range(len(scenes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_one, positions))
    else:
        outcomes = [run_one(position) for position in positions]

    rows = []
    for row, tracker in outcomes:
        if sink is not None:
            sink.record(row)
        tracker.persist(run_records)
        rows.append(row)
    return rows


def write_run_metadata(
    directory: Path, items: Mapping[str, Any], filename: str = METADATA_FILENAME
) -> Path:
    """key=value sidecar describing how a run's outputs were produced."""

    path = Path(directory) / filename
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={value}" for key, value in items.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def run_metadata(
    config: PipelineConfig, channel: ChannelModel, bank: NoiseBank, seed: int
) -> Dict[str, Any]:
    return {
        "rx_init": config.rx_init,
        "corrupt_scope": config.corrupt_scope,
        "strong_code": f"rep{config.codec.strong_repetition}",
        "weak_code": config.codec.weak_code,
        "run_length": str(config.codec.run_length).lower(),
        "channel": channel.kind,
        "p": channel.p,
        "bank_seed": bank.seed,
        "bank_size": bank.N,
        "seed": seed,
    }


def read_run_metadata(directory: Path, filename: str = METADATA_FILENAME) -> Dict[str, str]:
    """The sidecar written by :func:`write_run_metadata`, or an empty mapping."""

    path = Path(directory) / filename
    if not path.exists():
        return {}
    return {key: value for key, value in dotenv_values(path).items() if value is not None}
