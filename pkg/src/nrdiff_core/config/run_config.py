"""Run configuration: defaults < key=value config file < CLI flags."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values

from nrdiff_core.errors import ConfigError

RESOLVED_CONFIG_FILENAME = "resolved_config.env"


def _key(help_text: str, choices: Optional[Tuple[str, ...]] = None) -> Dict[str, Any]:
    return {"help": help_text, "choices": choices}


@dataclass(frozen=True)
class RunConfig:
    """Every experiment knob; a run directory always holds a frozen copy of the resolved values."""

    # diffusion schedule
    steps: int = field(default=100, metadata=_key("diffusion step count T"))
    beta_start: float = field(default=1e-4, metadata=_key("reference linear schedule start"))
    beta_end: float = field(default=0.02, metadata=_key("reference linear schedule end"))
    beta_rescale: bool = field(
        default=True, metadata=_key("rescale beta bounds by beta_reference_steps/steps")
    )
    beta_reference_steps: int = field(
        default=1000, metadata=_key("step count the beta bounds refer to")
    )

    # noise bank
    bank_size: int = field(default=1000, metadata=_key("noise bank size N"))
    bank_seed: int = field(default=1234, metadata=_key("noise bank seed"))
    bank_file_mode: str = field(
        default="full", metadata=_key("bank file layout", ("full", "seed"))
    )

    # scenes and conditions
    height: int = field(default=32, metadata=_key("scene height in pixels"))
    width: int = field(default=32, metadata=_key("scene width in pixels"))
    min_objects: int = field(default=1, metadata=_key("minimum objects per scene"))
    max_objects: int = field(default=5, metadata=_key("maximum objects per scene"))
    dataset_size: int = field(default=256, metadata=_key("scenes generated for training"))
    data_seed: int = field(default=7, metadata=_key("base seed of generated scenes"))
    edge_threshold: float = field(default=0.25, metadata=_key("edge gradient threshold"))

    # denoiser
    model_widths: Tuple[int, ...] = field(
        default=(16, 32, 64), metadata=_key("channel width per resolution level")
    )
    model_kernel: int = field(
        default=3, metadata=_key("convolution kernel size (1 = per-pixel MLP)")
    )
    time_embedding_dim: int = field(default=8, metadata=_key("sinusoidal time feature channels"))
    zero_init_head: bool = field(default=True, metadata=_key("zero-initialise prediction layer"))
    model_prediction: str = field(
        default="x0", metadata=_key("what the head estimates", ("noise", "x0"))
    )

    # optimiser and controller
    optimizer: str = field(default="adam", metadata=_key("update rule", ("sgd", "adam")))
    learning_rate: float = field(default=1e-3, metadata=_key("constant learning rate"))
    batch_size: int = field(default=8, metadata=_key("examples per train step"))
    max_steps: int = field(default=20000, metadata=_key("training step budget"))
    check_interval: int = field(default=1000, metadata=_key("validation check interval kappa"))
    validation_size: int = field(default=16, metadata=_key("validation scenes S"))
    target_score: float = field(default=0.25, metadata=_key("early-stop proxy threshold"))
    noise_mode: str = field(
        default="bank", metadata=_key("training noise source", ("bank", "gaussian"))
    )
    seed: int = field(default=0, metadata=_key("base seed for training, sampling and channel"))

    # channel and pipeline
    channel_p: float = field(default=0.0, metadata=_key("binary symmetric crossover probability"))
    corrupt_scope: str = field(
        default="all", metadata=_key("bits exposed to the channel", ("all", "index"))
    )
    weak_code: str = field(default="none", metadata=_key("index code", ("none", "rep3")))
    run_length: bool = field(default=False, metadata=_key("run-length code segmentation rows"))
    rx_init: str = field(
        default="dropped-term", metadata=_key("RX x_T initialisation", ("dropped-term", "oracle"))
    )

    # analytics
    psnr_cap: float = field(default=100.0, metadata=_key("PSNR reported for identical images"))
    nmi_bins: int = field(default=32, metadata=_key("histogram bins for mutual information"))
    fd_stride: int = field(default=10, metadata=_key("step stride of the forward comparison"))
    fd_images: int = field(default=16, metadata=_key("images in the forward comparison"))
    ablation_sizes: Tuple[int, ...] = field(
        default=(10, 1000, 10000), metadata=_key("bank sizes for the size ablation")
    )
    init_runs: int = field(default=64, metadata=_key("scenes in the noise-init comparison"))
    convergence_bank_seeds: Tuple[int, ...] = field(
        default=(1, 2, 3), metadata=_key("bank seeds in the convergence comparison")
    )
    svg: bool = field(default=False, metadata=_key("also emit SVG line plots"))

    def __post_init__(self) -> None:
        for item in dataclasses.fields(self):
            choices = item.metadata.get("choices")
            value = getattr(self, item.name)
            if choices and value not in choices:
                raise ConfigError(f"{item.name}={value!r} not in {', '.join(choices)}")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.bank_size < 1:
            raise ConfigError("bank_size must be >= 1")
        if self.check_interval < 1 or self.validation_size < 1:
            raise ConfigError("check_interval and validation_size must be >= 1")
        if self.target_score < 0:
            raise ConfigError("target_score must be >= 0")
        if not 0.0 <= self.channel_p <= 0.5:
            raise ConfigError("channel_p must lie in [0, 0.5]")
        if not self.model_widths:
            raise ConfigError("model_widths must name at least one level")

    @classmethod
    def keys(cls) -> Tuple[str, ...]:
        return tuple(item.name for item in dataclasses.fields(cls))

    @classmethod
    def choices(cls, key: str) -> Optional[Tuple[str, ...]]:
        for item in dataclasses.fields(cls):
            if item.name == key:
                return item.metadata.get("choices")
        raise ConfigError(f"unknown config key: {key}")

    @classmethod
    def describe(cls) -> Dict[str, str]:
        """Key -> help text, in declaration order."""

        return {item.name: item.metadata["help"] for item in dataclasses.fields(cls)}

    @classmethod
    def from_sources(
        cls,
        config_file: Optional[Path] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> "RunConfig":
        """Merge defaults, an optional key=value file and flag overrides (in that order)."""

        values: Dict[str, Any] = {}
        if config_file is not None:
            path = Path(config_file)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            for key, raw in dotenv_values(path).items():
                values[key] = _parse_value(key, raw)
        for key, raw in (overrides or {}).items():
            if raw is None:
                continue
            values[key] = _parse_value(key, raw)
        return cls(**values)

    def replace(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> Dict[str, str]:
        return {name: _format_value(getattr(self, name)) for name in self.keys()}

    def dump(self, directory: Path) -> Path:
        """Persist the fully resolved config as key=value text."""

        directory.mkdir(parents=True, exist_ok=True)
        path = directory / RESOLVED_CONFIG_FILENAME
        lines = [f"{key}={value}" for key, value in self.as_dict().items()]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def _field_types() -> Dict[str, Any]:
    return typing.get_type_hints(RunConfig)


def _parse_value(key: str, raw: Any) -> Any:
    types = _field_types()
    if key not in types:
        raise ConfigError(f"unknown config key: {key}")
    if raw is None:
        raise ConfigError(f"config key {key} has no value")
    kind = types[key]
    if not isinstance(raw, str):
        return tuple(raw) if kind == Tuple[int, ...] else raw
    text = raw.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in {"1", "true", "yes", "y", "on"}:
                return True
            if lowered in {"0", "false", "no", "n", "off"}:
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind == Tuple[int, ...]:
            return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from exc
    return text


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(item) for item in value)
    return repr(value) if isinstance(value, float) else str(value)
