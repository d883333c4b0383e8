"""Transmitter and receiver orchestration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.bank import NoiseBank, RadiusReport, select_noise
from nrdiff_core.channel import (
    Bits,
    CodecConfig,
    DecodeDiagnostics,
    PayloadReport,
    decode_packet,
    encode_packet,
    payload_report,
)
from nrdiff_core.diffusion import NoisePredictor, NoiseSchedule, forward_diffuse, sample
from nrdiff_core.errors import ConfigError, PacketLostError, ShapeError
from nrdiff_core.semantics import (
    DEFAULT_EDGE_THRESHOLD,
    NUM_CLASSES,
    SemanticCondition,
    extract_conditions,
)
from nrdiff_core.telemetry import StageTracker, track_stage

logger = logging.getLogger(__name__)

RX_DROPPED_TERM = "dropped-term"
RX_ORACLE = "oracle"
RX_INIT_MODES = (RX_DROPPED_TERM, RX_ORACLE)
CORRUPT_SCOPES = ("all", "index")


@dataclass(frozen=True)
class PipelineConfig:
    codec: CodecConfig = field(default_factory=CodecConfig)
    rx_init: str = RX_DROPPED_TERM
    corrupt_scope: str = "all"
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD
    num_classes: int = NUM_CLASSES
    psnr_cap: float = 100.0

    def __post_init__(self) -> None:
        if self.rx_init not in RX_INIT_MODES:
            raise ConfigError(f"rx_init must be one of {RX_INIT_MODES}, got {self.rx_init!r}")
        if self.corrupt_scope not in CORRUPT_SCOPES:
            raise ConfigError(
                f"corrupt_scope must be one of {CORRUPT_SCOPES}, got {self.corrupt_scope!r}"
            )


@dataclass(frozen=True, eq=False)
class TxArtifacts:
    index: int
    condition: SemanticCondition
    report: RadiusReport
    bits: Bits
    payload: PayloadReport
    # true noised latent, for inspection and oracle RX only; never encoded
    x_T: NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class RxResult:
    image: Optional[NDArray[np.float64]]
    condition: Optional[SemanticCondition]
    index: Optional[int]
    diagnostics: Optional[DecodeDiagnostics]
    timings_ms: Dict[str, float]
    rx_init: str = RX_DROPPED_TERM
    error: Optional[str] = None

    @property
    def completed(self) -> bool:
        return self.image is not None


def tx(
    image: NDArray[np.float64],
    labels: NDArray[np.uint8],
    bank: NoiseBank,
    schedule: NoiseSchedule,
    config: PipelineConfig = PipelineConfig(),
) -> TxArtifacts:
    """Extract the condition, pick the bank index, encode the packet."""

    image = np.asarray(image, dtype=np.float64)
    if tuple(image.shape) != tuple(bank.shape):
        raise ShapeError(f"image shape {image.shape} does not match bank shape {bank.shape}")
    condition = extract_conditions(image, labels, config.num_classes, config.edge_threshold)
    report = select_noise(bank, image, schedule)
    index = report.best_index
    bits = encode_packet(condition, index, bank.N, config.codec)
    x_T = forward_diffuse(image, schedule.T, bank.vector(index), schedule)
    logger.debug(f"TX selected index {index} (radius {report.best_radius:.3f})")
    return TxArtifacts(
        index=index,
        condition=condition,
        report=report,
        bits=bits,
        payload=payload_report(condition, bank.N, config.codec, channels=image.shape[0]),
        x_T=x_T,
    )


def initial_latent(
    bank: NoiseBank,
    index: int,
    schedule: NoiseSchedule,
    rx_init: str = RX_DROPPED_TERM,
    oracle_x_T: Optional[NDArray[np.float64]] = None,
) -> NDArray[np.float64]:
    """x_T for the reverse process: sqrt(1 - alpha_bar_T) * eps(index), or the true latent."""

    if rx_init == RX_ORACLE:
        if oracle_x_T is None:
            raise ConfigError("oracle RX needs the true x_T")
        return np.asarray(oracle_x_T, dtype=np.float64)
    alpha_bar_T = schedule.alpha_bar(schedule.T)
    return math.sqrt(1.0 - alpha_bar_T) * bank.vector(index).astype(np.float64)


def rx(
    bits: Bits,
    bank: NoiseBank,
    model: NoisePredictor,
    schedule: NoiseSchedule,
    config: PipelineConfig = PipelineConfig(),
    rng_seed: int = 0,
    oracle_x_T: Optional[NDArray[np.float64]] = None,
) -> RxResult:
    """Decode (m, i), fetch the bank vector, run the conditioned reverse process.

    An unrecoverable packet yields a result with ``image=None`` and the error text.
    """

    tracker = StageTracker("rx")
    try:
        with track_stage(tracker, "decode"):
            condition, index, diagnostics = decode_packet(bits, config.codec)
            if tuple(bank.shape[1:]) != condition.shape:
                raise PacketLostError(
                    f"decoded condition {condition.shape} does not match bank {bank.shape}"
                )
            if condition.num_classes != config.num_classes:
                raise PacketLostError(
                    f"decoded K={condition.num_classes}, expected {config.num_classes}"
                )
    except PacketLostError as exc:
        logger.warning(f"Packet lost: {exc}")
        return RxResult(
            image=None,
            condition=None,
            index=None,
            diagnostics=None,
            timings_ms=dict(tracker.timings_ms),
            rx_init=config.rx_init,
            error=str(exc),
        )

    if index >= bank.N:
        index %= bank.N
        logger.warning(f"Packet names N larger than the shared bank; index wrapped to {index}")

    with track_stage(tracker, "generate"):
        x_T = initial_latent(bank, index, schedule, config.rx_init, oracle_x_T)
        image = sample(model, condition, x_T, schedule, rng_seed)
    return RxResult(
        image=image,
        condition=condition,
        index=index,
        diagnostics=diagnostics,
        timings_ms=dict(tracker.timings_ms),
        rx_init=config.rx_init,
    )
