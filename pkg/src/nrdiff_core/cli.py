"""Command line interface for nrdiff-comm-core."""

from __future__ import annotations

import argparse
import logging
import math
import shutil
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Set, Tuple

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from nrdiff_core.__version__ import __version__
from nrdiff_core.analytics.experiments import (
    ABLATION_COLUMNS,
    CONVERGENCE_COLUMNS,
    FD_COLUMNS,
    INIT_COLUMNS,
    INIT_MODES,
    convergence_comparison,
    fd_comparison,
    nb_size_ablation,
    noise_init_comparison,
)
from nrdiff_core.analytics.plots import plot_csv
from nrdiff_core.bank import (
    NoiseBank,
    bank_statistics,
    build_bank,
    gaussian_radius,
    load_bank,
    save_bank,
    theoretical_radius,
)
from nrdiff_core.channel import (
    CodecConfig,
    decode_packet,
    encode_packet,
    packet_from_bytes,
    packet_to_bytes,
    repeat_decode,
    repeat_encode,
)
from nrdiff_core.config import (
    RESOLVED_CONFIG_FILENAME,
    RunConfig,
    channel_from,
    get_settings,
    pipeline_config_from,
    scene_params_from,
    schedule_from,
    training_config_from,
)
from nrdiff_core.controller import TrainingConfig, make_batch, run_training
from nrdiff_core.diffusion import NoiseSchedule, derive_seed
from nrdiff_core.errors import (
    ConfigError,
    FormatError,
    NRDiffError,
    PacketLostError,
    StageError,
    TrainingDivergedError,
)
from nrdiff_core.models import (
    ArchitectureConfig,
    DenoiserModel,
    gradient_check,
    load_checkpoint,
    save_checkpoint,
)
from nrdiff_core.pipeline import (
    METRICS_COLUMNS,
    evaluate_scenes,
    metrics_row,
    read_run_metadata,
    run_metadata,
    rx,
    tx,
    write_run_metadata,
)
from nrdiff_core.pipeline.runs import SAMPLER_TAG
from nrdiff_core.semantics import (
    NUM_CLASSES,
    SceneDataset,
    SceneParams,
    build_dataset,
    extract_conditions,
    generate_dataset,
    generate_scene,
    load_dataset,
    save_dataset,
)
from nrdiff_core.storage import CsvSink, JsonlSink, read_farbfeld, write_csv, write_farbfeld

console = Console()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_DIVERGED = 4

MODEL_FILE = "model.dgn"
BANK_FILE = "bank.nbk"
CHECKPOINT_DIR = "checkpoints"
DATASET_DIR = "dataset"
PACKET_FILE = "packet.bin"
PACKET_SIDECAR = "packet.env"
SOURCE_IMAGE = "source.ff"
REGENERATED_IMAGE = "regenerated.ff"
METRICS_FILE = "metrics.csv"
RECORDS_FILE = "run_records.jsonl"
FD_FILE = "fd_comparison.csv"
ABLATION_FILE = "nb_size_ablation.csv"
INIT_FILE = "init_comparison.csv"
INIT_SUMMARY = "init_summary.env"
CONVERGENCE_FILE = "convergence.csv"

GRADIENT_TOLERANCE = 1e-4
VERIFY_ROUND_TRIPS = 100
VERIFY_PAYLOAD_BITS = 512

Handler = Callable[[argparse.Namespace, RunConfig, Path], int]


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    handler = COMMANDS.get(args.command or "")
    if handler is None:
        parser.print_help()
        return EXIT_OK

    _configure_logging(args.verbose)
    try:
        config = RunConfig.from_sources(
            Path(args.config) if args.config else None,
            {key: getattr(args, key) for key in RunConfig.keys()},
        )
    except ConfigError as exc:
        console.print(f"[red]Config error:[/] {exc}")
        return EXIT_CONFIG

    out = Path(args.out).expanduser().resolve() if args.out else _default_out(args.command)
    guard = _ArtifactGuard(out)
    try:
        config.dump(out)
        return handler(args, config, out)
    except (NRDiffError, OSError, KeyError) as exc:
        guard.rollback()
        return _report_failure(exc)


def _default_out(command: str) -> Path:
    return get_settings().resolve_runs_dir() / command


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else get_settings().log_level
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code(exc.error)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (FormatError, PacketLostError, OSError, KeyError)):
        return EXIT_FORMAT
    if isinstance(exc, TrainingDivergedError):
        return EXIT_DIVERGED
    return EXIT_FAILED


def _report_failure(exc: Exception) -> int:
    code = _exit_code(exc)
    label = {
        EXIT_CONFIG: "Config error",
        EXIT_FORMAT: "Artifact error",
        EXIT_DIVERGED: "Training diverged",
    }.get(code, "Failed")
    console.print(f"[red]{label}:[/] {exc}")
    return code


class _ArtifactGuard:
    """Remembers what a run directory held so a failed command can remove what it added."""

    def __init__(self, directory: Path) -> None:
        self.directory = directory
        self.existed = directory.exists()
        self.before: Set[Path] = set(directory.rglob("*")) if self.existed else set()

    def rollback(self) -> None:
        if not self.directory.exists():
            return
        if not self.existed:
            shutil.rmtree(self.directory, ignore_errors=True)
            logger.warning(f"Removed partial run directory {self.directory}")
            return
        added = sorted(set(self.directory.rglob("*")) - self.before, reverse=True)
        for path in added:
            if path.is_dir():
                shutil.rmtree(path, ignore_errors=True)
            else:
                path.unlink(missing_ok=True)
        if added:
            logger.warning(f"Removed {len(added)} partial artifacts from {self.directory}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nrdiff",
        description="Noise-restricted diffusion goal-oriented communication simulator",
        epilog=_config_key_listing(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command")

    train = _add_command(subparsers, "train", "Train the denoiser with early stopping")
    _add_dataset_flags(train)
    train.add_argument("--resume", type=str, help="Checkpoint directory to resume from")

    gen_data = _add_command(subparsers, "gen-data", "Write synthetic scene records")
    gen_data.add_argument("--dataset", type=str, help="Target directory (defaults to OUT/dataset)")

    tx_cmd = _add_command(subparsers, "tx", "Encode one scene into a packet file")
    _add_artifact_flag(tx_cmd)
    _add_scene_flags(tx_cmd)

    rx_cmd = _add_command(subparsers, "rx", "Regenerate an image from a packet file")
    _add_artifact_flag(rx_cmd)
    rx_cmd.add_argument("--packet", type=str, required=True, help="Packet file written by tx")

    run = _add_command(subparsers, "run", "TX -> channel -> RX -> metrics for a set of scenes")
    _add_artifact_flag(run)
    _add_scene_flags(run)
    run.add_argument("--scenes", type=int, default=1, help="Number of consecutive scenes")

    ablate = _add_command(subparsers, "ablate-nb", "Noise bank size ablation")
    _add_dataset_flags(ablate)

    _add_command(subparsers, "fd-compare", "Fresh versus bank noise in the forward process")

    convergence = _add_command(
        subparsers, "convergence", "Validation score per check, Gaussian vs bank noise"
    )
    _add_dataset_flags(convergence)

    compare_init = _add_command(
        subparsers, "compare-init", "Selector index vs random index vs fresh noise at RX"
    )
    _add_artifact_flag(compare_init)

    _add_command(subparsers, "verify", "Gradient, bank and codec health checks")

    return parser


def _config_key_listing() -> str:
    lines = ["config keys (key=value in --config, or --key-name on any command):"]
    for key, help_text in RunConfig.describe().items():
        lines.append(f"  {key:<24} {help_text}")
    return "\n".join(lines)


def _add_command(subparsers: Any, name: str, help_text: str) -> argparse.ArgumentParser:
    command = subparsers.add_parser(name, help=help_text, description=help_text)
    command.add_argument("--config", type=str, help="key=value config file")
    command.add_argument("--out", type=str, help="Run directory (defaults to RUNS_DIR/<command>)")
    command.add_argument("--threads", type=int, help="Worker cap (defaults to NRDIFF_THREADS)")
    command.add_argument("--verbose", action="store_true", help="Debug logging")

    keys = command.add_argument_group("config keys")
    defaults = RunConfig().as_dict()
    for key, help_text in RunConfig.describe().items():
        choices = RunConfig.choices(key)
        keys.add_argument(
            f"--{key.replace('_', '-')}",
            dest=key,
            metavar="VALUE",
            choices=choices,
            help=f"{help_text} (default: {defaults[key]})",
        )
    return command


def _add_dataset_flags(command: argparse.ArgumentParser) -> None:
    command.add_argument("--dataset", type=str, help="Scene record directory from gen-data")
    command.add_argument(
        "--generate",
        action="store_true",
        help="Generate scenes in memory when --dataset does not exist",
    )


def _add_artifact_flag(command: argparse.ArgumentParser) -> None:
    command.add_argument(
        "--artifacts", type=str, required=True, help="Run directory written by train"
    )


def _add_scene_flags(command: argparse.ArgumentParser) -> None:
    command.add_argument("--dataset", type=str, help="Take scenes from a gen-data directory")
    command.add_argument("--scene-id", type=int, default=0, help="First evaluation scene")


def _threads(args: argparse.Namespace) -> int:
    return max(args.threads or get_settings().threads, 1)


def _evaluation_seed(config: RunConfig, scene_id: int) -> int:
    """Evaluation scenes follow the training seeds so the two never overlap."""

    return config.data_seed + config.dataset_size + scene_id


def _evaluation_scenes(config: RunConfig, first: int, count: int) -> SceneDataset:
    if count < 1:
        raise ConfigError(f"need at least one scene, got {count}")
    params = scene_params_from(config)
    scenes = [generate_scene(_evaluation_seed(config, first + i), params) for i in range(count)]
    return build_dataset(
        np.stack([scene.image for scene in scenes]),
        np.stack([scene.labels for scene in scenes]),
        [scene.seed for scene in scenes],
        config.edge_threshold,
    )


def _scene_set(args: argparse.Namespace, config: RunConfig, count: int) -> SceneDataset:
    if not args.dataset:
        return _evaluation_scenes(config, args.scene_id, count)
    dataset = load_dataset(Path(args.dataset), config.edge_threshold)
    stop = args.scene_id + count
    if args.scene_id < 0 or stop > len(dataset):
        raise ConfigError(f"scenes {args.scene_id}..{stop - 1} outside dataset of {len(dataset)}")
    return dataset.subset(range(args.scene_id, stop))


def _training_data(args: argparse.Namespace, config: RunConfig) -> SceneDataset:
    def generate() -> SceneDataset:
        return generate_dataset(
            config.dataset_size, config.data_seed, scene_params_from(config), config.edge_threshold
        )

    if not args.dataset:
        return generate()
    path = Path(args.dataset)
    if not path.exists() and args.generate:
        logger.warning(f"Dataset {path} not found; generating {config.dataset_size} scenes")
        return generate()
    return load_dataset(path, config.edge_threshold)


def _load_artifacts(
    directory: Path, config: RunConfig
) -> Tuple[DenoiserModel, NoiseBank, NoiseSchedule, Dict[str, str]]:
    bank = load_bank(directory / BANK_FILE)
    schedule = _artifact_schedule(directory, config)
    model = load_checkpoint(directory / MODEL_FILE, schedule)
    if bank.shape[0] != model.config.in_channels:
        raise FormatError(f"bank shape {bank.shape} does not fit the model's channels")
    return model, bank, schedule, read_run_metadata(directory)


def _artifact_schedule(directory: Path, config: RunConfig) -> NoiseSchedule:
    """This run's schedule; it must be the one the artifacts in ``directory`` were trained with."""

    trained_config = directory / RESOLVED_CONFIG_FILENAME
    if not trained_config.exists():
        raise FormatError(f"training config not found: {trained_config}")
    schedule = schedule_from(config)
    trained = schedule_from(RunConfig.from_sources(trained_config))
    if trained.T != schedule.T or not np.array_equal(trained.betas, schedule.betas):
        raise ConfigError(
            f"schedule T={schedule.T} with betas {schedule.betas[0]:.4g}..{schedule.betas[-1]:.4g} "
            f"differs from the training schedule in {directory} "
            f"(T={trained.T}, betas {trained.betas[0]:.4g}..{trained.betas[-1]:.4g})"
        )
    return schedule


def _check_scene_shape(shape: Tuple[int, ...], bank: NoiseBank) -> None:
    if tuple(shape) != tuple(bank.shape):
        raise ConfigError(f"scene shape {tuple(shape)} differs from the bank's {bank.shape}")


def _stop_step(metadata: Dict[str, str]) -> int:
    return int(metadata.get("stop_step", 0))


def _handle_train(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    dataset = _training_data(args, config)
    training = training_config_from(config)
    result = run_training(
        dataset,
        training,
        resume_from=Path(args.resume) if args.resume else None,
        checkpoint_dir=out / CHECKPOINT_DIR,
        threads=_threads(args),
    )
    save_checkpoint(result.model, out / MODEL_FILE)
    save_bank(result.bank, out / BANK_FILE, config.bank_file_mode)
    result.log.write(out)
    best = result.log.best_check
    write_run_metadata(
        out,
        {
            "stop_reason": result.log.stop_reason,
            "stop_step": result.log.stop_step,
            "steps_run": result.log.steps_run,
            "best_score": repr(best.score) if best else "",
            "best_step": best.step if best else "",
            "parameters": result.model.parameter_count,
            "bank_seed": result.bank.seed,
            "bank_size": result.bank.N,
            "steps": training.schedule.T,
            "seed": config.seed,
        },
    )

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Checkpoint step", justify="right")
    table.add_column("Score", justify="right")
    table.add_column("Stopped", justify="center")
    for check in result.log.checks:
        table.add_row(f"{check.step:,}", f"{check.score:.4f}", "yes" if check.stopped else "")
    console.print("[bold cyan]Training[/bold cyan]")
    console.print(
        f"Stop: {result.log.stop_reason} at step {result.log.stop_step:,} "
        f"({result.log.steps_run:,} steps this run)"
    )
    console.print(table)
    console.print(f"Artifacts: {out}")
    return EXIT_OK


def _handle_gen_data(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    dataset = generate_dataset(
        config.dataset_size, config.data_seed, scene_params_from(config), config.edge_threshold
    )
    target = Path(args.dataset) if args.dataset else out / DATASET_DIR
    save_dataset(dataset, target)
    console.print(f"Wrote {len(dataset):,} scenes to {target}")
    return EXIT_OK


def _handle_tx(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    bank = load_bank(Path(args.artifacts) / BANK_FILE)
    schedule = _artifact_schedule(Path(args.artifacts), config)
    scenes = _scene_set(args, config, 1)
    _check_scene_shape(scenes.image_shape, bank)
    pipeline = pipeline_config_from(config)
    artifacts = tx(scenes.images[0], scenes.labels[0], bank, schedule, pipeline)

    (out / PACKET_FILE).write_bytes(packet_to_bytes(artifacts.bits))
    write_farbfeld(out / SOURCE_IMAGE, scenes.images[0])
    write_run_metadata(
        out,
        {
            "scene_id": args.scene_id,
            "scene_seed": scenes.seeds[0],
            "index_tx": artifacts.index,
            "N": bank.N,
            "payload_bits_condition": artifacts.payload.condition_bits,
            "payload_bits_index": artifacts.payload.index_bits,
            "coded_bits": artifacts.payload.coded_total_bits,
            "source": SOURCE_IMAGE,
        },
        PACKET_SIDECAR,
    )

    report = artifacts.payload.as_dict()
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Payload", justify="left")
    table.add_column("Value", justify="right")
    for name, value in report.items():
        table.add_row(name, f"{value:,.1f}" if isinstance(value, float) else f"{value:,}")
    console.print(f"[bold cyan]TX[/bold cyan] scene {args.scene_id}: index {artifacts.index}")
    console.print(table)
    return EXIT_OK


def _handle_rx(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    if config.rx_init != "dropped-term":
        raise ConfigError("rx from a packet file supports rx_init=dropped-term only; use run")
    model, bank, schedule, metadata = _load_artifacts(Path(args.artifacts), config)
    packet = Path(args.packet)
    if not packet.exists():
        raise FormatError(f"packet file not found: {packet}")
    sidecar = read_run_metadata(packet.parent, PACKET_SIDECAR)
    scene_id = int(sidecar.get("scene_id", 0))

    result = rx(
        packet_from_bytes(packet.read_bytes()),
        bank,
        model,
        schedule,
        pipeline_config_from(config),
        rng_seed=derive_seed(config.seed, SAMPLER_TAG, scene_id),
    )
    for stage, elapsed in result.timings_ms.items():
        logger.debug(f"rx stage {stage}: {elapsed:.1f} ms")
    if not result.completed:
        console.print(f"[yellow]Packet lost:[/] {result.error}")
    else:
        write_farbfeld(out / REGENERATED_IMAGE, result.image)

    if "source" not in sidecar:
        console.print("[yellow]No tx sidecar next to the packet; metrics skipped.[/]")
        return EXIT_OK
    source = read_farbfeld(packet.parent / sidecar["source"])
    row = metrics_row(
        scene_id,
        config.seed,
        bank.N,
        0.0,
        int(sidecar.get("index_tx", -1)),
        int(sidecar.get("payload_bits_condition", 0)),
        int(sidecar.get("payload_bits_index", 0)),
        result,
        source,
        config.psnr_cap,
        _stop_step(metadata),
    )
    write_csv(out / METRICS_FILE, METRICS_COLUMNS, [row])
    console.print(
        f"[bold cyan]RX[/bold cyan] index {row['index_rx']} "
        f"proxy {row['proxy']:.4f} psnr {row['psnr']:.2f} dB"
    )
    return EXIT_OK


def _handle_run(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    model, bank, schedule, metadata = _load_artifacts(Path(args.artifacts), config)
    scenes = _scene_set(args, config, args.scenes)
    _check_scene_shape(scenes.image_shape, bank)
    pipeline = pipeline_config_from(config)
    channel = channel_from(config)
    records = JsonlSink(out / RECORDS_FILE) if get_settings().persist_run_records else None
    rows = evaluate_scenes(
        scenes,
        bank,
        model,
        schedule,
        channel,
        pipeline,
        seed=config.seed,
        stop_step=_stop_step(metadata),
        threads=_threads(args),
        sink=CsvSink(out / METRICS_FILE, METRICS_COLUMNS, truncate=True),
        run_records=records,
        first_id=args.scene_id,
    )
    write_run_metadata(out, run_metadata(pipeline, channel, bank, config.seed))
    console.print(_metrics_table(rows))
    return EXIT_OK


def _metrics_table(rows: List[Dict[str, Any]]) -> Table:
    table = Table(show_header=True, header_style="bold magenta")
    for column in ("scene_id", "index_tx", "index_rx", "proxy", "psnr"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(
            str(row["scene_id"]),
            str(row["index_tx"]),
            str(row["index_rx"]),
            f"{row['proxy']:.4f}",
            f"{row['psnr']:.2f}",
        )
    return table


def _handle_fd_compare(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    images = _evaluation_scenes(config, 0, config.fd_images).images
    bank = build_bank(config.bank_seed, config.bank_size, scene_params_from(config).shape)
    rows = fd_comparison(
        images,
        bank,
        schedule_from(config),
        stride=config.fd_stride,
        seed=config.seed,
        bins=config.nmi_bins,
        psnr_cap=config.psnr_cap,
        threads=_threads(args),
    )
    path = write_csv(out / FD_FILE, FD_COLUMNS, rows)
    if config.svg:
        plot_csv(path, "t", ["psnr_fd", "psnr_nrfd"], title="PSNR vs step")
        plot_csv(
            path, "t", ["nmi_fd", "nmi_nrfd"], title="NMI vs step", svg_path=out / "fd_nmi.svg"
        )
    worst = max(abs(row["psnr_fd"] - row["psnr_nrfd"]) for row in rows)
    console.print(f"Forward comparison: {len(rows)} steps, max PSNR gap {worst:.3f} dB -> {path}")
    return EXIT_OK


def _handle_ablate(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    rows = nb_size_ablation(
        _training_data(args, config),
        config.ablation_sizes,
        training_config_from(config),
        seeds=(config.seed,),
        threads=_threads(args),
    )
    path = write_csv(out / ABLATION_FILE, ABLATION_COLUMNS, rows)
    if config.svg:
        plot_csv(path, "nb_size", ["final_proxy"], title="Final proxy vs bank size")
    table = Table(show_header=True, header_style="bold magenta")
    for column in ABLATION_COLUMNS:
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(
            f"{row['nb_size']:,}",
            str(row["seed"]),
            f"{row['final_proxy']:.4f}",
            f"{row['steps_run']:,}",
        )
    console.print(table)
    return EXIT_OK


def _handle_convergence(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    rows = convergence_comparison(
        _training_data(args, config),
        training_config_from(config),
        config.convergence_bank_seeds,
        threads=_threads(args),
    )
    path = write_csv(out / CONVERGENCE_FILE, CONVERGENCE_COLUMNS, rows)
    if config.svg and rows:
        plot_csv(path, "step", ["score"], group_by=["variant", "bank_seed"], title="Convergence")
    console.print(f"Convergence: {len(rows)} checks -> {path}")
    return EXIT_OK


def _handle_compare_init(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    model, bank, schedule, _ = _load_artifacts(Path(args.artifacts), config)
    _check_scene_shape(scene_params_from(config).shape, bank)
    scenes = _evaluation_scenes(config, 0, config.init_runs)
    rows, summary = noise_init_comparison(
        scenes,
        bank,
        model,
        schedule,
        pipeline_config_from(config),
        seed=config.seed,
        threads=_threads(args),
    )
    write_csv(out / INIT_FILE, INIT_COLUMNS, rows)
    write_run_metadata(out, summary.as_dict(), INIT_SUMMARY)

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Mode", justify="left")
    table.add_column("Mean proxy", justify="right")
    table.add_column("Mean PSNR", justify="right")
    for mode in INIT_MODES:
        table.add_row(mode, f"{summary.mean_proxy[mode]:.4f}", f"{summary.mean_psnr[mode]:.2f}")
    console.print(table)
    console.print(
        f"Completion {summary.completion_rate:.0%}; "
        f"random-index degradation {summary.random_degradation:+.4f}"
    )
    return EXIT_OK


def _verify_gradients(config: RunConfig) -> Tuple[bool, str]:
    schedule = schedule_from(config)
    params = SceneParams(height=16, width=16)
    dataset = generate_dataset(2, config.data_seed, params, config.edge_threshold)
    architecture = ArchitectureConfig(
        widths=(4, 8), time_dim=4, zero_init_head=False, prediction=config.model_prediction
    )
    training = TrainingConfig(
        batch_size=2,
        seed=config.seed,
        bank_size=8,
        schedule=schedule,
        architecture=architecture,
    )
    bank = build_bank(config.bank_seed, training.bank_size, params.shape)
    model = DenoiserModel(architecture, seed=config.seed, schedule=schedule)
    error = gradient_check(model, make_batch(dataset, training, bank, 1), bank, schedule)
    return error < GRADIENT_TOLERANCE, f"max relative error {error:.2e}"


def _verify_bank(config: RunConfig) -> Tuple[bool, str]:
    bank = build_bank(config.bank_seed, config.bank_size, scene_params_from(config).shape)
    stats = bank_statistics(bank)
    radii = np.array([gaussian_radius(bank.vector(i)) for i in range(bank.N)])
    concentration = float(radii.mean()) / theoretical_radius(bank.shape)
    mean_ok = abs(stats.mean) <= 5.0 / math.sqrt(stats.entries)
    variance_ok = abs(stats.variance - 1.0) <= 5.0 * math.sqrt(2.0 / stats.entries)
    radius_ok = abs(concentration - 1.0) <= 0.05
    detail = (
        f"mean {stats.mean:+.2e}, variance {stats.variance:.4f}, "
        f"radius/expected {concentration:.4f}"
    )
    return mean_ok and variance_ok and radius_ok, detail


def _verify_strong_code(config: RunConfig) -> Tuple[bool, str]:
    r = CodecConfig().strong_repetition
    rng = np.random.default_rng([config.seed, 0x7631])
    payload = rng.integers(0, 2, VERIFY_PAYLOAD_BITS).astype(np.uint8)
    coded = repeat_encode(payload, r)
    patterns = [np.zeros(r, dtype=np.uint8)]
    for first in range(r):
        single = np.zeros(r, dtype=np.uint8)
        single[first] = 1
        patterns.append(single)
        for second in range(first + 1, r):
            double = single.copy()
            double[second] = 1
            patterns.append(double)
    failures = 0
    for pattern in patterns:
        decoded, _ = repeat_decode(coded ^ np.tile(pattern, VERIFY_PAYLOAD_BITS), r)
        failures += int(not np.array_equal(decoded, payload))
    return failures == 0, f"{len(patterns)} error patterns per group, {failures} failures"


def _verify_round_trips(config: RunConfig) -> Tuple[bool, str]:
    rng = np.random.default_rng([config.seed, 0x7274])
    params = SceneParams(height=16, width=16)
    failures = 0
    for trial in range(VERIFY_ROUND_TRIPS):
        scene = generate_scene(int(rng.integers(2**31)), params)
        condition = extract_conditions(scene.image, scene.labels, NUM_CLASSES)
        N = int(rng.integers(1, 5000))
        index = int(rng.integers(N))
        codec = CodecConfig(weak_code=("none", "rep3")[trial % 2], run_length=bool(trial % 3))
        decoded, decoded_index, _ = decode_packet(encode_packet(condition, index, N, codec), codec)
        failures += int(decoded != condition or decoded_index != index)
    return failures == 0, f"{VERIFY_ROUND_TRIPS} noiseless round trips, {failures} failures"


def _handle_verify(args: argparse.Namespace, config: RunConfig, out: Path) -> int:
    checks = [
        ("gradient check", _verify_gradients),
        ("bank statistics", _verify_bank),
        ("strong code <= 2 errors", _verify_strong_code),
        ("codec round trips", _verify_round_trips),
    ]
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Check", justify="left")
    table.add_column("Result", justify="center")
    table.add_column("Detail", justify="left")
    passed_all = True
    results = []
    for name, check in checks:
        passed, detail = check(config)
        passed_all = passed_all and passed
        table.add_row(name, "[green]pass[/]" if passed else "[red]FAIL[/]", detail)
        results.append({"check": name, "passed": passed, "detail": detail})
    write_csv(out / "verify.csv", ("check", "passed", "detail"), results)
    console.print(table)
    return EXIT_OK if passed_all else EXIT_FAILED


COMMANDS: Dict[str, Handler] = {
    "train": _handle_train,
    "gen-data": _handle_gen_data,
    "tx": _handle_tx,
    "rx": _handle_rx,
    "run": _handle_run,
    "ablate-nb": _handle_ablate,
    "fd-compare": _handle_fd_compare,
    "convergence": _handle_convergence,
    "compare-init": _handle_compare_init,
    "verify": _handle_verify,
}


if __name__ == "__main__":
    raise SystemExit(main())
