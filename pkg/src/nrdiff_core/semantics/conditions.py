"""Semantic condition extraction (segmentation + edge map) and tensorisation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import ShapeError

MAX_CLASSES = 16
DEFAULT_EDGE_THRESHOLD = 0.25


@dataclass(frozen=True, eq=False)
class SemanticCondition:
    """Label map with values in [0, K) plus a binary edge bitmap of the same size."""

    segmentation: NDArray[np.uint8]
    edges: NDArray[np.uint8]
    num_classes: int

    def __post_init__(self) -> None:
        if not 1 <= self.num_classes <= MAX_CLASSES:
            raise ShapeError(f"num_classes must lie in [1, {MAX_CLASSES}], got {self.num_classes}")
        if self.segmentation.ndim != 2 or self.segmentation.shape != self.edges.shape:
            raise ShapeError(
                f"segmentation {self.segmentation.shape} and edges {self.edges.shape} "
                "must be matching H x W maps"
            )
        if self.segmentation.size and int(self.segmentation.max()) >= self.num_classes:
            raise ShapeError(f"label {int(self.segmentation.max())} >= K={self.num_classes}")
        if np.any((self.edges != 0) & (self.edges != 1)):
            raise ShapeError("edge map must be binary")

    @property
    def shape(self) -> tuple[int, int]:
        return self.segmentation.shape  # type: ignore[return-value]

    @property
    def channels(self) -> int:
        return self.num_classes + 1

    def to_tensor(self) -> NDArray[np.float64]:
        """K one-hot label channels followed by one edge channel, values in {0, 1}."""

        H, W = self.shape
        tensor = np.zeros((self.channels, H, W), dtype=np.float64)
        rows, cols = np.indices((H, W))
        tensor[self.segmentation.astype(np.intp), rows, cols] = 1.0
        tensor[-1] = self.edges
        return tensor

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SemanticCondition):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and np.array_equal(self.segmentation, other.segmentation)
            and np.array_equal(self.edges, other.edges)
        )

    __hash__ = None  # type: ignore[assignment]


ConditionLike = Union[SemanticCondition, Sequence[SemanticCondition], NDArray[np.float64]]


def edge_map(
    image: NDArray[np.float64], threshold: float = DEFAULT_EDGE_THRESHOLD
) -> NDArray[np.uint8]:
    """1 where the largest per-channel central-difference gradient magnitude exceeds threshold."""

    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ShapeError(f"expected C x H x W image, got {image.shape}")
    if image.shape[1] < 2 or image.shape[2] < 2:
        return np.zeros(image.shape[1:], dtype=np.uint8)
    gy, gx = np.gradient(image, axis=(1, 2))
    magnitude = np.sqrt(gx**2 + gy**2).max(axis=0)
    return (magnitude > threshold).astype(np.uint8)


def extract_conditions(
    image: NDArray[np.float64],
    labels: NDArray[np.uint8],
    num_classes: int,
    threshold: float = DEFAULT_EDGE_THRESHOLD,
) -> SemanticCondition:
    """Oracle segmentation (labels passed through) plus the image's edge map."""

    image = np.asarray(image)
    labels = np.asarray(labels)
    if image.ndim != 3 or image.shape[1:] != labels.shape:
        raise ShapeError(f"labels {labels.shape} do not match image {image.shape}")
    return SemanticCondition(
        segmentation=labels.astype(np.uint8, copy=True),
        edges=edge_map(image, threshold),
        num_classes=num_classes,
    )


def condition_batch(m: ConditionLike, batch: int) -> NDArray[np.float64]:
    """Tensorise one condition, a sequence of conditions, or pass through a ready tensor."""

    if isinstance(m, SemanticCondition):
        tensor = m.to_tensor()[None]
    elif isinstance(m, np.ndarray):
        tensor = m[None] if m.ndim == 3 else m
        tensor = tensor.astype(np.float64, copy=False)
    else:
        tensor = np.stack([item.to_tensor() for item in m])
    if tensor.shape[0] == 1 and batch > 1:
        tensor = np.broadcast_to(tensor, (batch,) + tensor.shape[1:])
    if tensor.shape[0] != batch:
        raise ShapeError(f"{tensor.shape[0]} conditions for a batch of {batch}")
    return tensor
