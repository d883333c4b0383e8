"""Experiment drivers: forward-process comparison, bank-size ablation, RX init, convergence.

Every driver returns its rows in a fixed order regardless of ``threads``; the
per-item work derives its randomness from (seed, tag, item) only.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.bank import NoiseBank
from nrdiff_core.channel import encode_packet
from nrdiff_core.controller import TrainingConfig, evaluate_checkpoint, run_training
from nrdiff_core.diffusion import (
    NoisePredictor,
    NoiseSchedule,
    derive_seed,
    forward_diffuse,
    nr_forward_diffuse,
    sample,
)
from nrdiff_core.errors import ConfigError, NRDiffError
from nrdiff_core.pipeline import PipelineConfig, rx, tx
from nrdiff_core.semantics import SceneDataset

from .quality import (
    DEFAULT_NMI_BINS,
    DEFAULT_PSNR_CAP,
    normalized_mutual_information,
    perceptual_proxy,
    psnr,
)

logger = logging.getLogger(__name__)

FD_COLUMNS = ("t", "psnr_fd", "psnr_nrfd", "nmi_fd", "nmi_nrfd")
ABLATION_COLUMNS = ("nb_size", "seed", "final_proxy", "steps_run")
INIT_COLUMNS = ("scene_id", "mode", "index", "proxy", "psnr", "completed")
CONVERGENCE_COLUMNS = ("variant", "bank_seed", "step", "score")

INIT_SELECTED = "nb-gr"
INIT_RANDOM = "nb-random"
INIT_FORWARD = "fwd"
INIT_MODES = (INIT_SELECTED, INIT_RANDOM, INIT_FORWARD)

VARIANT_GAUSSIAN = "gaussian"
VARIANT_BANK = "bank"

FD_NOISE_TAG = 0x46
FD_INDEX_TAG = 0x4E
RANDOM_INDEX_TAG = 0x49
FORWARD_TAG = 0x57
SAMPLER_TAG = 0x52

Item = TypeVar("Item")
Result = TypeVar("Result")


def _ordered_map(
    function: Callable[[Item], Result], items: Iterable[Item], threads: int
) -> List[Result]:
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(function, items))
    return [function(item) for item in items]


def sampled_steps(T: int, stride: int) -> List[int]:
    """t = stride, 2 * stride, ... up to T."""

    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    return list(range(stride, T + 1, stride))


def fd_comparison(
    images: NDArray[np.float64],
    bank: NoiseBank,
    schedule: NoiseSchedule,
    stride: int = 10,
    seed: int = 0,
    bins: int = DEFAULT_NMI_BINS,
    psnr_cap: float = DEFAULT_PSNR_CAP,
    threads: int = 1,
    fresh_from_bank: bool = False,
) -> List[Dict[str, Any]]:
    """PSNR and NMI of x_t against x0 under fresh Gaussian noise and under bank noise.

    Metrics are averaged over ``images`` at each sampled step. With
    ``fresh_from_bank`` the fresh draw is replaced by the same bank vector the
    restricted variant uses, so both columns must agree exactly.
    """

    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or images.shape[0] < 1:
        raise ConfigError("fd_comparison needs a non-empty B x C x H x W image set")
    steps = sampled_steps(schedule.T, stride)

    def per_image(position: int) -> NDArray[np.float64]:
        x0 = images[position]
        table = np.empty((len(steps), 4), dtype=np.float64)
        for row, t in enumerate(steps):
            index = int(
                np.random.default_rng([seed, FD_INDEX_TAG, position, t]).integers(bank.N)
            )
            if fresh_from_bank:
                fresh = bank.vector(index).astype(np.float64)
            else:
                fresh = np.random.default_rng([seed, FD_NOISE_TAG, position, t]).standard_normal(
                    x0.shape
                )
            x_fd = forward_diffuse(x0, t, fresh, schedule)
            x_nr = nr_forward_diffuse(x0, t, bank, index, schedule)
            table[row] = (
                psnr(x0, x_fd, cap=psnr_cap),
                psnr(x0, x_nr, cap=psnr_cap),
                normalized_mutual_information(x0, x_fd, bins),
                normalized_mutual_information(x0, x_nr, bins),
            )
        return table

    tables = _ordered_map(per_image, range(images.shape[0]), threads)
    mean = np.mean(np.stack(tables), axis=0)
    logger.info(f"Forward comparison over {images.shape[0]} images at {len(steps)} steps")
    return [
        {
            "t": t,
            "psnr_fd": float(values[0]),
            "psnr_nrfd": float(values[1]),
            "nmi_fd": float(values[2]),
            "nmi_nrfd": float(values[3]),
        }
        for t, values in zip(steps, mean)
    ]


def _split_validation(
    dataset: SceneDataset, config: TrainingConfig, validation: Optional[SceneDataset]
) -> Tuple[SceneDataset, SceneDataset]:
    if validation is not None:
        return dataset, validation
    return dataset.split(config.validation_size)


def nb_size_ablation(
    dataset: SceneDataset,
    sizes: Sequence[int],
    config: TrainingConfig,
    seeds: Sequence[int] = (0,),
    validation: Optional[SceneDataset] = None,
    threads: int = 1,
) -> List[Dict[str, Any]]:
    """Train one model per (bank size, seed) under the same budget and report its final score.

    The final score is re-measured on the shared validation set after training,
    whether the run stopped early or exhausted ``max_steps``.
    """

    if not sizes:
        raise ConfigError("nb_size_ablation needs at least one bank size")
    train, held_out = _split_validation(dataset, config, validation)
    jobs = [(int(size), int(seed)) for size in sizes for seed in seeds]

    def run(job: Tuple[int, int]) -> Dict[str, Any]:
        size, seed = job
        run_config = replace(config, bank_size=size, seed=seed)
        result = run_training(train, run_config, validation=held_out)
        final = evaluate_checkpoint(result.model, result.bank, config.schedule, held_out, seed)
        logger.info(f"N={size} seed={seed}: final proxy {final:.4f} after {result.log.steps_run}")
        return {
            "nb_size": size,
            "seed": seed,
            "final_proxy": final,
            "steps_run": result.log.steps_run,
        }

    return _ordered_map(run, jobs, threads)


@dataclass(frozen=True)
class InitComparisonSummary:
    runs: int
    completion_rate: float
    mean_proxy: Dict[str, float]
    mean_psnr: Dict[str, float]

    @property
    def random_degradation(self) -> float:
        """Mean proxy of random-index runs minus that of selector-index runs."""

        return self.mean_proxy[INIT_RANDOM] - self.mean_proxy[INIT_SELECTED]

    def as_dict(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {"runs": self.runs, "completion_rate": self.completion_rate}
        for mode in INIT_MODES:
            row[f"mean_proxy_{mode}"] = self.mean_proxy[mode]
            row[f"mean_psnr_{mode}"] = self.mean_psnr[mode]
        row["random_degradation"] = self.random_degradation
        return row


def _score_row(
    scene_id: int,
    mode: str,
    index: int,
    source: NDArray[np.float64],
    image: Optional[NDArray[np.float64]],
    psnr_cap: float,
) -> Dict[str, Any]:
    completed = (
        image is not None
        and bool(np.all(np.isfinite(image)))
        and float(np.max(np.abs(image))) <= 1.0
    )
    if not completed or image is None:
        return {
            "scene_id": scene_id,
            "mode": mode,
            "index": index,
            "proxy": 1.0,
            "psnr": 0.0,
            "completed": False,
        }
    return {
        "scene_id": scene_id,
        "mode": mode,
        "index": index,
        "proxy": perceptual_proxy(source, image),
        "psnr": psnr(source, image, cap=psnr_cap),
        "completed": True,
    }


def noise_init_comparison(
    scenes: SceneDataset,
    bank: NoiseBank,
    model: NoisePredictor,
    schedule: NoiseSchedule,
    config: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    threads: int = 1,
) -> Tuple[List[Dict[str, Any]], InitComparisonSummary]:
    """Regenerate every scene from the selector index, a random index and fresh noise.

    The two bank modes go through the packet coder and the receiver; the random
    mode swaps the transmitted index for a uniform draw before encoding. A
    receiver failure is recorded as an incomplete row rather than raised.
    """

    if len(scenes) < 1:
        raise ConfigError("noise_init_comparison needs at least one scene")
    scale = math.sqrt(1.0 - schedule.alpha_bar(schedule.T))

    def run(position: int) -> List[Dict[str, Any]]:
        source = scenes.images[position]
        rng_seed = derive_seed(seed, SAMPLER_TAG, position)
        artifacts = tx(source, scenes.labels[position], bank, schedule, config)
        random_index = int(
            np.random.default_rng([seed, RANDOM_INDEX_TAG, position]).integers(bank.N)
        )
        packets = {
            INIT_SELECTED: (artifacts.index, artifacts.bits),
            INIT_RANDOM: (
                random_index,
                encode_packet(artifacts.condition, random_index, bank.N, config.codec),
            ),
        }
        rows = []
        for mode, (index, bits) in packets.items():
            try:
                result = rx(bits, bank, model, schedule, config, rng_seed=rng_seed)
                image = result.image
            except NRDiffError as exc:
                logger.warning(f"scene {position} ({mode}) failed: {exc}")
                image = None
            rows.append(_score_row(position, mode, index, source, image, config.psnr_cap))

        fresh = np.random.default_rng([seed, FORWARD_TAG, position]).standard_normal(
            source.shape
        )
        image = sample(model, artifacts.condition, scale * fresh, schedule, rng_seed)
        rows.append(_score_row(position, INIT_FORWARD, -1, source, image, config.psnr_cap))
        return rows

    rows = [row for group in _ordered_map(run, range(len(scenes)), threads) for row in group]
    summary = InitComparisonSummary(
        runs=len(scenes),
        completion_rate=float(np.mean([row["completed"] for row in rows])),
        mean_proxy={
            mode: float(np.mean([row["proxy"] for row in rows if row["mode"] == mode]))
            for mode in INIT_MODES
        },
        mean_psnr={
            mode: float(np.mean([row["psnr"] for row in rows if row["mode"] == mode]))
            for mode in INIT_MODES
        },
    )
    logger.info(
        f"Init comparison: completion {summary.completion_rate:.0%}, "
        f"random-index degradation {summary.random_degradation:+.4f}"
    )
    return rows, summary


def convergence_comparison(
    dataset: SceneDataset,
    config: TrainingConfig,
    bank_seeds: Sequence[int],
    validation: Optional[SceneDataset] = None,
    threads: int = 1,
) -> List[Dict[str, Any]]:
    """Validation score at every check for the unrestricted baseline and each bank seed.

    The baseline trains once with fresh Gaussian noise and is scored against the
    bank of ``config.bank_seed``.
    """

    if not bank_seeds:
        raise ConfigError("convergence_comparison needs at least one bank seed")
    train, held_out = _split_validation(dataset, config, validation)
    jobs = [(VARIANT_GAUSSIAN, config.bank_seed)]
    jobs += [(VARIANT_BANK, int(bank_seed)) for bank_seed in bank_seeds]

    def run(job: Tuple[str, int]) -> List[Dict[str, Any]]:
        variant, bank_seed = job
        run_config = replace(config, noise_mode=variant, bank_seed=bank_seed)
        log = run_training(train, run_config, validation=held_out).log
        return [
            {"variant": variant, "bank_seed": bank_seed, "step": check.step, "score": check.score}
            for check in log.checks
        ]

    return [row for rows in _ordered_map(run, jobs, threads) for row in rows]
