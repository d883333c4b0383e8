"""Synthetic scenes and semantic condition extraction."""

from .conditions import (
    DEFAULT_EDGE_THRESHOLD,
    MAX_CLASSES,
    ConditionLike,
    SemanticCondition,
    condition_batch,
    edge_map,
    extract_conditions,
)
from .dataset import SceneDataset, build_dataset, generate_dataset, load_dataset, save_dataset
from .scenes import NUM_CLASSES, Scene, SceneLabel, SceneParams, generate_scene

__all__ = [
    "DEFAULT_EDGE_THRESHOLD",
    "MAX_CLASSES",
    "NUM_CLASSES",
    "ConditionLike",
    "Scene",
    "SceneDataset",
    "SceneLabel",
    "SceneParams",
    "SemanticCondition",
    "build_dataset",
    "condition_batch",
    "edge_map",
    "extract_conditions",
    "generate_dataset",
    "generate_scene",
    "load_dataset",
    "save_dataset",
]
