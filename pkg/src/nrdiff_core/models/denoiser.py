"""Conditional noise-prediction network: a small convolutional encoder-decoder."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.typing import DTypeLike, NDArray

from nrdiff_core.diffusion import NoiseSchedule
from nrdiff_core.errors import ConfigError, ShapeError
from nrdiff_core.semantics import NUM_CLASSES, ConditionLike, condition_batch

from .layers import (
    Array,
    AvgPool2,
    Conv2d,
    Grads,
    Layer,
    SiLU,
    Upsample2,
    accumulate,
    split_channels,
)

logger = logging.getLogger(__name__)

StepLike = Union[int, NDArray[np.integer]]

PREDICTIONS = ("noise", "x0")


@dataclass(frozen=True)
class ArchitectureConfig:
    """Channel widths per resolution level, kernel size, time features, condition classes.

    ``kernel = 1`` with a single width gives a per-pixel MLP, handy for tests. With
    ``prediction = "x0"`` the head estimates the clean image and the noise estimate is
    derived from it through the model's schedule.
    """

    widths: Tuple[int, ...] = (16, 32, 64)
    kernel: int = 3
    time_dim: int = 8
    in_channels: int = 3
    num_classes: int = NUM_CLASSES
    zero_init_head: bool = True
    prediction: str = "noise"

    def __post_init__(self) -> None:
        if not self.widths or any(w < 1 for w in self.widths):
            raise ConfigError(f"widths must be non-empty positive ints, got {self.widths}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be odd and positive, got {self.kernel}")
        if self.time_dim < 0 or self.time_dim % 2:
            raise ConfigError(f"time_dim must be even and non-negative, got {self.time_dim}")
        if self.in_channels < 1:
            raise ConfigError("in_channels must be positive")
        if not 1 <= self.num_classes <= 16:
            raise ConfigError(f"num_classes must lie in [1, 16], got {self.num_classes}")
        if self.prediction not in PREDICTIONS:
            raise ConfigError(f"prediction must be one of {PREDICTIONS}, got {self.prediction!r}")

    @property
    def levels(self) -> int:
        return len(self.widths)

    @property
    def condition_channels(self) -> int:
        return self.num_classes + 1

    @property
    def input_channels(self) -> int:
        return self.in_channels + self.condition_channels + self.time_dim

    @property
    def spatial_multiple(self) -> int:
        return 2 ** (self.levels - 1)


def time_features(steps: NDArray[np.integer], time_dim: int, H: int, W: int) -> Array:
    """Sinusoidal embedding of each step, broadcast to constant B x time_dim x H x W planes."""

    steps = np.asarray(steps, dtype=np.float64).reshape(-1)
    if time_dim == 0:
        return np.zeros((steps.shape[0], 0, H, W))
    half = time_dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half, 1))
    angles = steps[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    return np.broadcast_to(emb[:, :, None, None], (steps.shape[0], time_dim, H, W))


@dataclass
class _Block:
    conv: Conv2d
    act: SiLU = field(default_factory=SiLU)


class DenoiserModel:
    """epsilon_theta(x_t, t | m) with float32 parameter storage and float64 compute.

    Parameters live in ``self.parameters`` in a fixed registration order; the
    mapping is replaced wholesale on update, never mutated in place. ``schedule``
    is required for x0 prediction only.
    """

    def __init__(
        self,
        config: ArchitectureConfig = ArchitectureConfig(),
        seed: int = 0,
        dtype: DTypeLike = np.float32,
        schedule: Optional[NoiseSchedule] = None,
    ) -> None:
        self.config = config
        self.dtype = np.dtype(dtype)
        self.schedule = schedule
        self._build_layers()
        rng = np.random.default_rng([int(seed), 0x6D6F64])
        params: Dict[str, NDArray[Any]] = {}
        for layer in self._registration_order():
            for key, value in layer.initialize(rng).items():
                params[key] = value.astype(self.dtype)
        self.parameters = params

    def _build_layers(self) -> None:
        cfg = self.config
        k = cfg.kernel
        widths = cfg.widths
        self.encoder: List[Tuple[_Block, _Block]] = []
        previous = cfg.input_channels
        for level, width in enumerate(widths):
            self.encoder.append(
                (
                    _Block(Conv2d(f"enc{level}.conv1", previous, width, k)),
                    _Block(Conv2d(f"enc{level}.conv2", width, width, k)),
                )
            )
            previous = width
        self.decoder: List[_Block] = []
        for level in range(len(widths) - 2, -1, -1):
            self.decoder.append(
                _Block(
                    Conv2d(
                        f"dec{level}.conv", widths[level + 1] + widths[level], widths[level], k
                    )
                )
            )
        self.head = Conv2d("head", widths[0], cfg.in_channels, k, zero_init=cfg.zero_init_head)
        self.pool = AvgPool2()
        self.upsample = Upsample2()

    def _registration_order(self) -> List[Layer]:
        order: List[Layer] = []
        for first, second in self.encoder:
            order.extend([first.conv, second.conv])
        order.extend(block.conv for block in self.decoder)
        order.append(self.head)
        return order

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = {}
        for layer in self._registration_order():
            shapes.update(layer.parameter_shapes())
        return shapes

    @property
    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.parameters.values()))

    def flat_parameters(self) -> NDArray[Any]:
        return np.concatenate([value.reshape(-1) for value in self.parameters.values()])

    def load_flat(self, flat: NDArray[Any]) -> None:
        flat = np.asarray(flat)
        if flat.size != self.parameter_count:
            raise ShapeError(f"expected {self.parameter_count} parameters, got {flat.size}")
        params: Dict[str, NDArray[Any]] = {}
        offset = 0
        for key, shape in self.parameter_shapes().items():
            size = int(np.prod(shape))
            params[key] = flat[offset : offset + size].reshape(shape).astype(self.dtype)
            offset += size
        self.parameters = params

    def copy(self, dtype: Optional[DTypeLike] = None) -> "DenoiserModel":
        clone = object.__new__(DenoiserModel)
        clone.config = self.config
        clone.dtype = np.dtype(dtype) if dtype is not None else self.dtype
        clone.schedule = self.schedule
        clone._build_layers()
        clone.parameters = {
            key: np.array(value, dtype=clone.dtype) for key, value in self.parameters.items()
        }
        return clone

    def check_input(self, x: Array, cond: Array) -> None:
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != cfg.in_channels:
            raise ShapeError(f"expected B x {cfg.in_channels} x H x W input, got {x.shape}")
        H, W = x.shape[2:]
        if H % cfg.spatial_multiple or W % cfg.spatial_multiple:
            raise ShapeError(
                f"spatial size {H}x{W} must be divisible by {cfg.spatial_multiple} "
                f"for {cfg.levels} resolution levels"
            )
        expected = (x.shape[0], cfg.condition_channels, H, W)
        if cond.shape != expected:
            raise ShapeError(f"condition tensor {cond.shape} does not match {expected}")

    def forward(self, x_t: Array, steps: NDArray[np.integer], cond: Array) -> Tuple[Array, Any]:
        """Batched forward pass; returns the prediction and the cache for ``backward``."""

        x_t = np.asarray(x_t, dtype=np.float64)
        cond = np.asarray(cond, dtype=np.float64)
        self.check_input(x_t, cond)
        B, _, H, W = x_t.shape
        params = self.parameters
        steps = np.broadcast_to(np.asarray(steps), (B,))

        h = np.concatenate([x_t, cond, time_features(steps, self.config.time_dim, H, W)], axis=1)
        caches: List[Any] = []
        skips: List[Array] = []
        for level, blocks in enumerate(self.encoder):
            if level > 0:
                h, _ = self.pool.forward(params, h)
            for block in blocks:
                h, conv_cache = block.conv.forward(params, h)
                h, act_cache = block.act.forward(params, h)
                caches.append((conv_cache, act_cache))
            skips.append(h)

        for offset, block in enumerate(self.decoder):
            skip = skips[-2 - offset]
            up, _ = self.upsample.forward(params, h)
            h = np.concatenate([up, skip], axis=1)
            h, conv_cache = block.conv.forward(params, h)
            h, act_cache = block.act.forward(params, h)
            caches.append((conv_cache, act_cache))

        out, head_cache = self.head.forward(params, h)
        scale = None
        if self.config.prediction == "x0":
            skip, scale = self._clean_image_scales(steps)
            out = skip * x_t + scale * out
        return out, (caches, head_cache, scale)

    def _clean_image_scales(self, steps: NDArray[np.integer]) -> Tuple[Array, Array]:
        """Per-example a, b with noise estimate = a * x_t + b * clean estimate."""

        if self.schedule is None:
            raise ConfigError("x0 prediction needs the model's noise schedule")
        index = np.asarray(steps, dtype=np.int64)
        if np.any(index < 1) or np.any(index > self.schedule.T):
            raise ShapeError(f"steps must lie in 1..{self.schedule.T}")
        alpha_bar = self.schedule.alpha_bars[index - 1][:, None, None, None]
        noise_std = np.sqrt(1.0 - alpha_bar)
        return 1.0 / noise_std, -np.sqrt(alpha_bar) / noise_std

    def backward(self, cache: Any, grad_output: Array) -> Grads:
        """Parameter gradients for an upstream gradient on the prediction."""

        caches, head_cache, scale = cache
        if scale is not None:
            grad_output = grad_output * scale
        params = self.parameters
        grads: Grads = {}
        widths = self.config.widths

        g, head_grads = self.head.backward(params, head_cache, grad_output)
        accumulate(grads, head_grads)

        position = len(caches)
        skip_grads: Dict[int, Array] = {}
        for offset in range(len(self.decoder) - 1, -1, -1):
            block = self.decoder[offset]
            position -= 1
            conv_cache, act_cache = caches[position]
            g, _ = block.act.backward(params, act_cache, g)
            g, conv_grads = block.conv.backward(params, conv_cache, g)
            accumulate(grads, conv_grads)
            level = len(widths) - 2 - offset
            g_up, g_skip = split_channels(g, (widths[level + 1], widths[level]))
            skip_grads[level] = g_skip
            g, _ = self.upsample.backward(params, None, g_up)

        for level in range(len(self.encoder) - 1, -1, -1):
            if level in skip_grads:
                g = g + skip_grads[level]
            for block in reversed(self.encoder[level]):
                position -= 1
                conv_cache, act_cache = caches[position]
                g, _ = block.act.backward(params, act_cache, g)
                g, conv_grads = block.conv.backward(params, conv_cache, g)
                accumulate(grads, conv_grads)
            if level > 0:
                g, _ = self.pool.backward(params, None, g)

        return {key: grads[key] for key in params}

    def predict_noise(self, x_t: Array, t: StepLike, m: ConditionLike) -> Array:
        """Noise prediction for one C x H x W tensor or a batch; output shape equals input."""

        x = np.asarray(x_t, dtype=np.float64)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.ndim != 4:
            raise ShapeError(f"expected C x H x W or B x C x H x W, got {np.shape(x_t)}")
        cond = condition_batch(m, x.shape[0])
        out, _ = self.forward(x, np.asarray(t), cond)
        return out[0] if single else out
