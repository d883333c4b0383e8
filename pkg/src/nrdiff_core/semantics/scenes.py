"""Synthetic street-like scenes standing in for a real driving dataset."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Tuple

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import ConfigError

logger = logging.getLogger(__name__)

CHANNELS = 3
MIN_SIDE = 16


class SceneLabel(IntEnum):
    BACKGROUND = 0
    ROAD = 1
    VEHICLE = 2
    PEDESTRIAN = 3
    SKY = 4


NUM_CLASSES = len(SceneLabel)

# Adjacent layout bands differ by < 0.45 per channel so their boundaries stay below the
# default edge threshold; objects contrast strongly with everything.
PALETTE: Dict[SceneLabel, Tuple[float, float, float]] = {
    SceneLabel.BACKGROUND: (0.10, 0.15, 0.35),
    SceneLabel.ROAD: (-0.25, -0.20, -0.05),
    SceneLabel.VEHICLE: (0.85, -0.55, -0.45),
    SceneLabel.PEDESTRIAN: (0.80, 0.75, -0.60),
    SceneLabel.SKY: (0.30, 0.45, 0.70),
}
COLOR_JITTER = 0.02


@dataclass(frozen=True)
class SceneParams:
    height: int = 32
    width: int = 32
    min_objects: int = 1
    max_objects: int = 5
    vehicle_share: float = 0.6

    def __post_init__(self) -> None:
        if self.height < MIN_SIDE or self.width < MIN_SIDE:
            raise ConfigError(
                f"scenes need height and width >= {MIN_SIDE}, got {self.height}x{self.width}"
            )
        if not 0 <= self.min_objects <= self.max_objects:
            raise ConfigError(
                f"object counts must satisfy 0 <= min <= max "
                f"(got {self.min_objects}, {self.max_objects})"
            )

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (CHANNELS, self.height, self.width)


@dataclass(frozen=True)
class PlacedObject:
    label: SceneLabel
    top: int
    left: int
    height: int
    width: int


@dataclass(frozen=True, eq=False)
class Scene:
    seed: int
    image: NDArray[np.float64]
    labels: NDArray[np.uint8]
    objects: Tuple[PlacedObject, ...] = field(default_factory=tuple)
    sky_rows: int = 0
    road_top: int = 0


def _size(rng: np.random.Generator, low: int, high: int, scale: float) -> int:
    return max(2, int(round(int(rng.integers(low, high + 1)) * scale)))


def _place_vehicle(
    rng: np.random.Generator, labels: NDArray[np.uint8], road_top: int, scale: float
) -> PlacedObject:
    H, W = labels.shape
    width = min(_size(rng, 4, 7, scale), W)
    height = min(_size(rng, 3, 4, scale), H - road_top)
    top = int(rng.integers(max(road_top - height // 2, 0), H - height + 1))
    left = int(rng.integers(0, W - width + 1))
    labels[top : top + height, left : left + width] = SceneLabel.VEHICLE
    return PlacedObject(SceneLabel.VEHICLE, top, left, height, width)


def _place_pedestrian(
    rng: np.random.Generator, labels: NDArray[np.uint8], road_top: int, scale: float
) -> PlacedObject:
    H, W = labels.shape
    width = min(_size(rng, 2, 3, scale), W)
    height = min(_size(rng, 4, 7, scale), H)
    top = int(rng.integers(max(min(road_top - height // 2, H - height), 0), H - height + 1))
    left = int(rng.integers(0, W - width + 1))
    rows = np.arange(top, min(top + height, H))[:, None]
    cols = np.arange(left, left + width)[None, :]
    cy = top + (height - 1) / 2.0
    cx = left + (width - 1) / 2.0
    ry = max(height / 2.0, 0.5)
    rx = max(width / 2.0, 0.5)
    inside = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0
    region = labels[top : top + rows.shape[0], left : left + width]
    region[inside] = SceneLabel.PEDESTRIAN
    return PlacedObject(SceneLabel.PEDESTRIAN, top, left, height, width)


def render(labels: NDArray[np.uint8], rng: np.random.Generator) -> NDArray[np.float64]:
    """Paint each label with its palette colour plus a per-scene jitter."""

    table = np.zeros((NUM_CLASSES, CHANNELS), dtype=np.float64)
    for label, colour in PALETTE.items():
        table[label] = np.asarray(colour) + rng.uniform(-COLOR_JITTER, COLOR_JITTER, CHANNELS)
    image = np.moveaxis(table[labels], -1, 0)
    # float32-representable so stored records reload bitwise
    return np.clip(image, -1.0, 1.0).astype(np.float32).astype(np.float64)


def generate_scene(seed: int, params: SceneParams = SceneParams()) -> Scene:
    """Deterministic scene: sky band, background band, road plane and 0..max objects."""

    rng = np.random.default_rng(int(seed))
    H, W = params.height, params.width
    scale = min(H, W) / 32.0

    sky_rows = int(round(H * rng.uniform(0.2, 0.35)))
    road_top = int(round(H * rng.uniform(0.55, 0.7)))
    road_top = max(road_top, sky_rows + 2)

    labels = np.full((H, W), SceneLabel.BACKGROUND, dtype=np.uint8)
    labels[:sky_rows] = SceneLabel.SKY
    labels[road_top:] = SceneLabel.ROAD

    count = int(rng.integers(params.min_objects, params.max_objects + 1))
    objects = []
    for _ in range(count):
        if rng.random() < params.vehicle_share:
            objects.append(_place_vehicle(rng, labels, road_top, scale))
        else:
            objects.append(_place_pedestrian(rng, labels, road_top, scale))

    image = render(labels, rng)
    return Scene(
        seed=int(seed),
        image=image,
        labels=labels,
        objects=tuple(objects),
        sky_rows=sky_rows,
        road_top=road_top,
    )
