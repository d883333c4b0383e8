"""Image quality and information metrics."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray

from nrdiff_core.errors import ConfigError, NRDiffError, ShapeError

Array = NDArray[np.float64]

DEFAULT_PSNR_CAP = 100.0
DEFAULT_PEAK = 2.0
DEFAULT_NMI_BINS = 32

PROXY_WINDOW = 8
PROXY_STRIDE = 4
PROXY_C1 = (0.01 * 2.0) ** 2
PROXY_C2 = (0.03 * 2.0) ** 2
PROXY_C3 = PROXY_C2 / 2.0
GRADIENT_EPS = 1e-3


@dataclass(frozen=True)
class MetricRecord:
    name: str
    value: float
    inputs_digest: str
    parameters: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise NRDiffError(f"metric {self.name} is not finite: {self.value}")


def _pair(a: Array, b: Array) -> tuple[Array, Array]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"metric inputs differ in shape: {a.shape} vs {b.shape}")
    return a, b


def inputs_digest(a: Array, b: Array) -> str:
    digest = hashlib.sha256()
    for array in (a, b):
        digest.update(str(np.shape(array)).encode())
        digest.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
    return digest.hexdigest()[:16]


def psnr(a: Array, b: Array, peak: float = DEFAULT_PEAK, cap: float = DEFAULT_PSNR_CAP) -> float:
    """10 * log10(peak^2 / MSE) in dB, never above ``cap`` (returned for MSE = 0)."""

    a, b = _pair(a, b)
    if peak <= 0:
        raise ConfigError(f"PSNR peak must be positive, got {peak}")
    mse = float(np.mean(np.square(a - b)))
    if mse == 0.0:
        return float(cap)
    return float(min(10.0 * math.log10(peak * peak / mse), cap))


def _entropy_bits(probabilities: Array) -> float:
    nonzero = probabilities[probabilities > 0]
    return float(-np.sum(nonzero * np.log2(nonzero)))


def normalized_mutual_information(a: Array, b: Array, bins: int = DEFAULT_NMI_BINS) -> float:
    """Histogram MI(a; b) / sqrt(H(a) H(b)) with equal-width bins over [-1, 1].

    If either input falls into a single bin the result is 1 for identical inputs
    and 0 otherwise.
    """

    a, b = _pair(a, b)
    if bins < 2:
        raise ConfigError(f"NMI needs at least 2 bins, got {bins}")
    joint, _, _ = np.histogram2d(
        np.clip(a.reshape(-1), -1.0, 1.0),
        np.clip(b.reshape(-1), -1.0, 1.0),
        bins=bins,
        range=[[-1.0, 1.0], [-1.0, 1.0]],
    )
    joint /= joint.sum()
    h_a = _entropy_bits(joint.sum(axis=1))
    h_b = _entropy_bits(joint.sum(axis=0))
    if h_a == 0.0 or h_b == 0.0:
        return 1.0 if np.array_equal(a, b) else 0.0
    mutual = h_a + h_b - _entropy_bits(joint)
    return float(np.clip(mutual / math.sqrt(h_a * h_b), 0.0, 1.0))


def _as_channels(x: Array) -> Array:
    if x.ndim == 2:
        return x[None]
    if x.ndim != 3:
        raise ShapeError(f"expected H x W or C x H x W image, got {x.shape}")
    return x


def structural_similarity(a: Array, b: Array) -> float:
    """Mean of clipped luminance * contrast * structure terms over strided windows."""

    a, b = _pair(a, b)
    a, b = _as_channels(a), _as_channels(b)
    wh = min(PROXY_WINDOW, a.shape[1])
    ww = min(PROXY_WINDOW, a.shape[2])
    win_a = sliding_window_view(a, (wh, ww), axis=(1, 2))[:, ::PROXY_STRIDE, ::PROXY_STRIDE]
    win_b = sliding_window_view(b, (wh, ww), axis=(1, 2))[:, ::PROXY_STRIDE, ::PROXY_STRIDE]

    mu_a = win_a.mean(axis=(-2, -1))
    mu_b = win_b.mean(axis=(-2, -1))
    dev_a = win_a - mu_a[..., None, None]
    dev_b = win_b - mu_b[..., None, None]
    var_a = np.mean(dev_a * dev_a, axis=(-2, -1))
    var_b = np.mean(dev_b * dev_b, axis=(-2, -1))
    cov = np.mean(dev_a * dev_b, axis=(-2, -1))
    sd_a = np.sqrt(var_a)
    sd_b = np.sqrt(var_b)

    luminance = (2 * mu_a * mu_b + PROXY_C1) / (mu_a**2 + mu_b**2 + PROXY_C1)
    contrast = (2 * sd_a * sd_b + PROXY_C2) / (var_a + var_b + PROXY_C2)
    structure = (cov + PROXY_C3) / (sd_a * sd_b + PROXY_C3)
    terms = np.clip(luminance, 0, 1) * np.clip(contrast, 0, 1) * np.clip(structure, 0, 1)
    return float(terms.mean())


def gradient_difference(a: Array, b: Array) -> float:
    """Mean |grad a - grad b| over the summed mean gradient magnitudes of a and b.

    Normalised per image, so faint texture in a flat region costs little next to a
    missing or misplaced edge. Lies in [0, 1].
    """

    a, b = _pair(a, b)
    a, b = _as_channels(a), _as_channels(b)
    if a.shape[1] < 2 or a.shape[2] < 2:
        return 0.0
    ay, ax = np.gradient(a, axis=(1, 2))
    by, bx = np.gradient(b, axis=(1, 2))
    diff = np.hypot(ax - bx, ay - by)
    norm = float(np.mean(np.hypot(ax, ay)) + np.mean(np.hypot(bx, by))) + GRADIENT_EPS
    return float(np.mean(diff)) / norm


def perceptual_proxy(a: Array, b: Array) -> float:
    """0.5 * (1 - structural similarity) + 0.5 * gradient difference; 0 iff identical."""

    a, b = _pair(a, b)
    if np.array_equal(a, b):
        return 0.0
    value = 0.5 * (1.0 - structural_similarity(a, b)) + 0.5 * gradient_difference(a, b)
    return float(np.clip(value, 0.0, 1.0))


def evaluate_pair(
    source: Array,
    regenerated: Array,
    cap: float = DEFAULT_PSNR_CAP,
    bins: int = DEFAULT_NMI_BINS,
) -> List[MetricRecord]:
    digest = inputs_digest(source, regenerated)
    return [
        MetricRecord("proxy", perceptual_proxy(source, regenerated), digest),
        MetricRecord(
            "psnr", psnr(source, regenerated, cap=cap), digest, {"peak": DEFAULT_PEAK, "cap": cap}
        ),
        MetricRecord(
            "nmi", normalized_mutual_information(source, regenerated, bins), digest, {"bins": bins}
        ),
    ]
