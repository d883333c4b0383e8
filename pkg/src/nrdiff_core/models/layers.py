"""Layer set for the denoiser with hand-written reverse-mode gradients.

Layers hold no parameters themselves: ``forward`` reads them from the model's
parameter mapping and returns a cache, ``backward`` turns the cache and the
upstream gradient into the input gradient plus per-parameter gradients.
"""

from __future__ import annotations

import math
from typing import Any, Dict, Mapping, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray

from nrdiff_core.errors import ShapeError

Array = NDArray[np.float64]
Params = Mapping[str, NDArray[Any]]
Grads = Dict[str, Array]


class Layer:
    name: str = ""

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {}

    def initialize(self, rng: np.random.Generator) -> Dict[str, Array]:
        return {}

    def forward(self, params: Params, x: Array) -> Tuple[Array, Any]:
        raise NotImplementedError

    def backward(self, params: Params, cache: Any, grad_output: Array) -> Tuple[Array, Grads]:
        raise NotImplementedError


class Conv2d(Layer):
    """Stride-1 'same' convolution over B x C x H x W inputs (odd kernel)."""

    def __init__(
        self, name: str, in_channels: int, out_channels: int, kernel: int, zero_init: bool = False
    ) -> None:
        if kernel < 1 or kernel % 2 == 0:
            raise ShapeError(f"{name}: kernel must be odd and positive, got {kernel}")
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.zero_init = zero_init

    @property
    def weight_key(self) -> str:
        return f"{self.name}.weight"

    @property
    def bias_key(self) -> str:
        return f"{self.name}.bias"

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        k = self.kernel
        return {
            self.weight_key: (self.out_channels, self.in_channels, k, k),
            self.bias_key: (self.out_channels,),
        }

    def initialize(self, rng: np.random.Generator) -> Dict[str, Array]:
        shapes = self.parameter_shapes()
        if self.zero_init:
            weight = np.zeros(shapes[self.weight_key])
        else:
            fan_in = self.in_channels * self.kernel * self.kernel
            weight = rng.standard_normal(shapes[self.weight_key]) * math.sqrt(2.0 / fan_in)
        return {self.weight_key: weight, self.bias_key: np.zeros(shapes[self.bias_key])}

    def _windows(self, x: Array) -> Array:
        pad = self.kernel // 2
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        return sliding_window_view(padded, (self.kernel, self.kernel), axis=(2, 3))

    def forward(self, params: Params, x: Array) -> Tuple[Array, Any]:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"{self.name}: expected B x {self.in_channels} x H x W input, got {x.shape}"
            )
        weight = np.asarray(params[self.weight_key], dtype=np.float64)
        bias = np.asarray(params[self.bias_key], dtype=np.float64)
        windows = self._windows(x)
        out = np.einsum("bchwij,ocij->bohw", windows, weight, optimize=True)
        out += bias[None, :, None, None]
        return out, windows

    def backward(self, params: Params, cache: Any, grad_output: Array) -> Tuple[Array, Grads]:
        windows = cache
        weight = np.asarray(params[self.weight_key], dtype=np.float64)
        grads = {
            self.weight_key: np.einsum("bchwij,bohw->ocij", windows, grad_output, optimize=True),
            self.bias_key: grad_output.sum(axis=(0, 2, 3)),
        }
        B, _, H, W = grad_output.shape
        k = self.kernel
        pad = k // 2
        grad_windows = np.einsum("bohw,ocij->bchwij", grad_output, weight, optimize=True)
        grad_padded = np.zeros((B, self.in_channels, H + 2 * pad, W + 2 * pad))
        for i in range(k):
            for j in range(k):
                grad_padded[:, :, i : i + H, j : j + W] += grad_windows[..., i, j]
        return grad_padded[:, :, pad : pad + H, pad : pad + W], grads


def _sigmoid(x: Array) -> Array:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class SiLU(Layer):
    def __init__(self, name: str = "silu") -> None:
        self.name = name

    def forward(self, params: Params, x: Array) -> Tuple[Array, Any]:
        s = _sigmoid(x)
        return x * s, (x, s)

    def backward(self, params: Params, cache: Any, grad_output: Array) -> Tuple[Array, Grads]:
        x, s = cache
        return grad_output * (s + x * s * (1.0 - s)), {}


class AvgPool2(Layer):
    """2x2 average pooling; H and W must be even."""

    def __init__(self, name: str = "pool") -> None:
        self.name = name

    def forward(self, params: Params, x: Array) -> Tuple[Array, Any]:
        B, C, H, W = x.shape
        if H % 2 or W % 2:
            raise ShapeError(f"{self.name}: cannot pool odd spatial size {H}x{W}")
        return x.reshape(B, C, H // 2, 2, W // 2, 2).mean(axis=(3, 5)), None

    def backward(self, params: Params, cache: Any, grad_output: Array) -> Tuple[Array, Grads]:
        spread = np.repeat(np.repeat(grad_output, 2, axis=2), 2, axis=3)
        return spread * 0.25, {}


class Upsample2(Layer):
    """Nearest-neighbour 2x upsampling."""

    def __init__(self, name: str = "up") -> None:
        self.name = name

    def forward(self, params: Params, x: Array) -> Tuple[Array, Any]:
        return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3), None

    def backward(self, params: Params, cache: Any, grad_output: Array) -> Tuple[Array, Grads]:
        B, C, H, W = grad_output.shape
        return grad_output.reshape(B, C, H // 2, 2, W // 2, 2).sum(axis=(3, 5)), {}


def split_channels(grad: Array, widths: Tuple[int, ...]) -> Tuple[Array, ...]:
    """Backward of a channel concatenation."""

    bounds = np.cumsum(widths)[:-1]
    return tuple(np.split(grad, bounds, axis=1))


def accumulate(into: Grads, grads: Grads) -> None:
    for key, value in grads.items():
        if key in into:
            into[key] = into[key] + value
        else:
            into[key] = value
