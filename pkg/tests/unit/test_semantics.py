from __future__ import annotations

import numpy as np
import pytest

from nrdiff_core.errors import ConfigError, FormatError, ShapeError
from nrdiff_core.semantics import (
    NUM_CLASSES,
    SceneLabel,
    SceneParams,
    SemanticCondition,
    condition_batch,
    edge_map,
    extract_conditions,
    generate_dataset,
    generate_scene,
    load_dataset,
    save_dataset,
)


def test_scene_is_deterministic():
    first = generate_scene(17)
    second = generate_scene(17)
    assert np.array_equal(first.image, second.image)
    assert np.array_equal(first.labels, second.labels)
    assert not np.array_equal(first.image, generate_scene(18).image)


def test_scene_layout_and_range():
    params = SceneParams(height=32, width=48, min_objects=2, max_objects=4)
    scene = generate_scene(3, params)
    assert scene.image.shape == (3, 32, 48)
    assert scene.labels.shape == (32, 48)
    assert scene.image.min() >= -1.0 and scene.image.max() <= 1.0
    assert 2 <= len(scene.objects) <= 4
    assert np.all(scene.labels[0] == SceneLabel.SKY)
    assert scene.road_top > scene.sky_rows
    assert int(scene.labels.max()) < NUM_CLASSES


def test_scene_without_objects_has_only_layout_labels():
    scene = generate_scene(5, SceneParams(min_objects=0, max_objects=0))
    layout = {SceneLabel.SKY, SceneLabel.BACKGROUND, SceneLabel.ROAD}
    assert set(np.unique(scene.labels).tolist()) <= {int(label) for label in layout}


@pytest.mark.parametrize(
    "kwargs",
    [{"height": 8}, {"width": 15}, {"min_objects": 3, "max_objects": 2}, {"min_objects": -1}],
)
def test_invalid_scene_params(kwargs):
    with pytest.raises(ConfigError):
        SceneParams(**kwargs)


def test_edge_map_marks_step_boundary():
    image = np.zeros((3, 6, 6))
    image[:, :, 3:] = 1.0
    edges = edge_map(image, threshold=0.25)
    assert edges.dtype == np.uint8
    assert np.all(edges[:, 2:4] == 1)
    assert np.all(edges[:, :2] == 0)
    assert np.all(edges[:, 4:] == 0)


def test_edge_map_flat_image_is_empty():
    assert not edge_map(np.full((3, 5, 5), 0.4)).any()


def test_condition_tensor_layout():
    labels = np.array([[0, 1], [2, 4]], dtype=np.uint8)
    condition = SemanticCondition(labels, np.array([[0, 1], [1, 0]], dtype=np.uint8), 5)
    tensor = condition.to_tensor()
    assert tensor.shape == (6, 2, 2)
    assert np.array_equal(tensor[:5].sum(axis=0), np.ones((2, 2)))
    assert tensor[4, 1, 1] == 1.0
    assert np.array_equal(tensor[5], [[0, 1], [1, 0]])


def test_condition_validation():
    labels = np.zeros((2, 2), dtype=np.uint8)
    with pytest.raises(ShapeError):
        SemanticCondition(labels, np.zeros((2, 3), dtype=np.uint8), 5)
    with pytest.raises(ShapeError):
        SemanticCondition(labels + 5, np.zeros((2, 2), dtype=np.uint8), 5)
    with pytest.raises(ShapeError):
        SemanticCondition(labels, np.full((2, 2), 2, dtype=np.uint8), 5)
    with pytest.raises(ShapeError):
        SemanticCondition(labels, np.zeros((2, 2), dtype=np.uint8), 17)


def test_extract_conditions_passes_labels_through():
    scene = generate_scene(9)
    condition = extract_conditions(scene.image, scene.labels, NUM_CLASSES)
    assert np.array_equal(condition.segmentation, scene.labels)
    assert condition.shape == (32, 32)
    with pytest.raises(ShapeError):
        extract_conditions(scene.image, scene.labels[:, :16], NUM_CLASSES)


def test_condition_batch_broadcasts_single_condition():
    scene = generate_scene(2)
    condition = extract_conditions(scene.image, scene.labels, NUM_CLASSES)
    tensor = condition_batch(condition, 3)
    assert tensor.shape == (3, NUM_CLASSES + 1, 32, 32)
    with pytest.raises(ShapeError):
        condition_batch([condition, condition], 3)


def test_dataset_split_holds_out_tail():
    dataset = generate_dataset(6, 100)
    train, validation = dataset.split(2)
    assert len(train) == 4 and len(validation) == 2
    assert validation.seeds == (104, 105)
    with pytest.raises(ConfigError):
        dataset.split(6)


def test_dataset_round_trip(tmp_path):
    dataset = generate_dataset(4, 50, SceneParams(height=16, width=24))
    save_dataset(dataset, tmp_path / "data")
    loaded = load_dataset(tmp_path / "data")
    assert loaded.seeds == dataset.seeds
    assert np.array_equal(loaded.images, dataset.images)
    assert np.array_equal(loaded.labels, dataset.labels)
    assert loaded.conditions == dataset.conditions


def test_dataset_missing_index(tmp_path):
    with pytest.raises(FormatError):
        load_dataset(tmp_path / "absent")


def test_dataset_corrupt_record(tmp_path):
    dataset = generate_dataset(2, 1, SceneParams(height=16, width=16))
    save_dataset(dataset, tmp_path)
    record = tmp_path / "scene_00001.scn"
    record.write_bytes(record.read_bytes()[:-10])
    with pytest.raises(FormatError):
        load_dataset(tmp_path)


def test_dataset_rejects_malformed_index_line(tmp_path):
    dataset = generate_dataset(3, 1, SceneParams(height=16, width=16))
    index = save_dataset(dataset, tmp_path)
    lines = index.read_text(encoding="utf-8").splitlines()
    lines[1] = '{"record": "scene_00001.scn"'
    index.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(FormatError, match=r"index\.jsonl:2"):
        load_dataset(tmp_path)


def test_dataset_rejects_index_entry_without_record(tmp_path):
    dataset = generate_dataset(2, 1, SceneParams(height=16, width=16))
    index = save_dataset(dataset, tmp_path)
    with index.open("a", encoding="utf-8") as handle:
        handle.write('["scene_00000.scn"]\n')
    with pytest.raises(FormatError, match=r"index\.jsonl:3"):
        load_dataset(tmp_path)


def test_scene_census_covers_every_class_with_sparse_edges():
    seen = set()
    densities = []
    for seed in range(1000):
        scene = generate_scene(seed)
        seen.update(np.unique(scene.labels).tolist())
        densities.append(float(edge_map(scene.image).mean()))
    assert seen == set(range(NUM_CLASSES))
    assert max(densities) < 0.25
