"""Scene datasets: in-memory collections and the on-disk record layout."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from nrdiff_core.errors import ConfigError, FormatError
from nrdiff_core.storage import JsonlSink
from nrdiff_core.storage.binary import BinaryReader, BinaryWriter

from .conditions import DEFAULT_EDGE_THRESHOLD, SemanticCondition, extract_conditions
from .scenes import NUM_CLASSES, SceneParams, generate_scene

logger = logging.getLogger(__name__)

RECORD_MAGIC = b"SCN1"
RECORD_VERSION = 1
INDEX_FILENAME = "index.jsonl"


@dataclass(frozen=True, eq=False)
class SceneDataset:
    """Images, ground-truth labels and extracted conditions, index-aligned."""

    images: NDArray[np.float64]
    labels: NDArray[np.uint8]
    conditions: Tuple[SemanticCondition, ...]
    seeds: Tuple[int, ...]
    num_classes: int = NUM_CLASSES

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])  # type: ignore[return-value]

    def condition_tensors(self, indices: Sequence[int]) -> NDArray[np.float64]:
        return np.stack([self.conditions[int(i)].to_tensor() for i in indices])

    def subset(self, indices: Sequence[int]) -> "SceneDataset":
        idx = [int(i) for i in indices]
        return SceneDataset(
            images=self.images[idx],
            labels=self.labels[idx],
            conditions=tuple(self.conditions[i] for i in idx),
            seeds=tuple(self.seeds[i] for i in idx),
            num_classes=self.num_classes,
        )

    def split(self, holdout: int) -> Tuple["SceneDataset", "SceneDataset"]:
        """Last ``holdout`` scenes become the validation set."""

        if not 1 <= holdout < len(self):
            raise ConfigError(
                f"cannot hold out {holdout} validation scenes from a dataset of {len(self)}"
            )
        cut = len(self) - holdout
        return self.subset(range(cut)), self.subset(range(cut, len(self)))


def build_dataset(
    images: NDArray[np.float64],
    labels: NDArray[np.uint8],
    seeds: Sequence[int],
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD,
    num_classes: int = NUM_CLASSES,
) -> SceneDataset:
    conditions = tuple(
        extract_conditions(image, label, num_classes, edge_threshold)
        for image, label in zip(images, labels)
    )
    return SceneDataset(
        images=np.asarray(images, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.uint8),
        conditions=conditions,
        seeds=tuple(int(seed) for seed in seeds),
        num_classes=num_classes,
    )


def generate_dataset(
    count: int,
    base_seed: int,
    params: SceneParams = SceneParams(),
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD,
) -> SceneDataset:
    """``count`` scenes with seeds base_seed, base_seed + 1, ..."""

    if count < 1:
        raise ConfigError(f"dataset needs at least one scene, got {count}")
    scenes = [generate_scene(base_seed + i, params) for i in range(count)]
    return build_dataset(
        np.stack([scene.image for scene in scenes]),
        np.stack([scene.labels for scene in scenes]),
        [scene.seed for scene in scenes],
        edge_threshold,
    )


def _record_name(position: int) -> str:
    return f"scene_{position:05d}.scn"


def encode_record(seed: int, image: NDArray[np.float64], labels: NDArray[np.uint8]) -> bytes:
    C, H, W = image.shape
    writer = BinaryWriter()
    writer.magic(RECORD_MAGIC)
    writer.u32(RECORD_VERSION)
    writer.u64(seed)
    writer.u32(C)
    writer.u32(H)
    writer.u32(W)
    writer.f32_array(image.reshape(-1))
    writer.raw(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())
    return writer.to_bytes()


def decode_record(data: bytes, label: str) -> Tuple[int, NDArray[np.float64], NDArray[np.uint8]]:
    reader = BinaryReader(data, label)
    reader.expect_magic(RECORD_MAGIC)
    reader.expect_version((RECORD_VERSION,))
    seed = reader.u64("seed")
    C, H, W = reader.u32("C"), reader.u32("H"), reader.u32("W")
    if min(C, H, W) < 1:
        raise FormatError(f"{label}: invalid shape {(C, H, W)}")
    image = reader.f32_array(C * H * W, "image").reshape(C, H, W).astype(np.float64)
    labels = np.frombuffer(reader.raw(H * W, "labels"), dtype=np.uint8).reshape(H, W).copy()
    reader.expect_end()
    if int(labels.max(initial=0)) >= NUM_CLASSES:
        raise FormatError(f"{label}: label {int(labels.max())} out of range")
    return seed, image, labels


def save_dataset(dataset: SceneDataset, directory: Path) -> Path:
    """One binary record per scene plus a JSONL index listing them in order."""

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index_path = directory / INDEX_FILENAME
    if index_path.exists():
        index_path.unlink()
    sink = JsonlSink(index_path)
    for position in range(len(dataset)):
        name = _record_name(position)
        record = encode_record(
            dataset.seeds[position], dataset.images[position], dataset.labels[position]
        )
        (directory / name).write_bytes(record)
        sink.record({"record": name, "seed": dataset.seeds[position]})
    logger.info(f"Wrote {len(dataset)} scene records to {directory}")
    return index_path


def _read_index(index_path: Path) -> Iterator[Dict[str, object]]:
    """Index entries in order; any malformed line fails the whole load."""

    with index_path.open("r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{index_path}:{number}: invalid JSON: {exc.msg}") from exc
            if not isinstance(entry, dict) or not isinstance(entry.get("record"), str):
                raise FormatError(f"{index_path}:{number}: expected an object with a record name")
            yield entry


def load_dataset(
    directory: Path, edge_threshold: float = DEFAULT_EDGE_THRESHOLD
) -> SceneDataset:
    directory = Path(directory)
    index_path = directory / INDEX_FILENAME
    if not index_path.exists():
        raise FormatError(f"dataset index not found: {index_path}")

    seeds: List[int] = []
    images: List[NDArray[np.float64]] = []
    labels: List[NDArray[np.uint8]] = []
    for entry in _read_index(index_path):
        name = str(entry["record"])
        path = directory / name
        if not name or not path.exists():
            raise FormatError(f"dataset record missing: {path}")
        seed, image, label_map = decode_record(path.read_bytes(), f"dataset record {name}")
        seeds.append(seed)
        images.append(image)
        labels.append(label_map)
    if not images:
        raise FormatError(f"dataset index lists no records: {index_path}")
    if len({image.shape for image in images}) != 1:
        raise FormatError("dataset records have inconsistent shapes")
    return build_dataset(np.stack(images), np.stack(labels), seeds, edge_threshold)
