from __future__ import annotations

import numpy as np
import pytest

from nrdiff_core.bank import build_bank
from nrdiff_core.diffusion import build_schedule
from nrdiff_core.errors import ConfigError, FormatError, ShapeError, TrainingDivergedError
from nrdiff_core.models import (
    SGD,
    Adam,
    ArchitectureConfig,
    DenoiserModel,
    TrainBatch,
    build_optimizer,
    gradient_check,
    load_checkpoint,
    load_optimizer_state,
    prepare_inputs,
    restricted_loss,
    save_checkpoint,
    save_optimizer_state,
    train_step,
)
from nrdiff_core.models import training
from nrdiff_core.models.layers import AvgPool2, Conv2d, Upsample2
from nrdiff_core.semantics import SceneParams, generate_dataset

TINY = ArchitectureConfig(widths=(4, 8), time_dim=4, zero_init_head=False)
SMALL_SCENES = SceneParams(height=16, width=16)


@pytest.fixture
def setup():
    dataset = generate_dataset(3, 100, SMALL_SCENES)
    bank = build_bank(11, 4, dataset.image_shape)
    schedule = build_schedule(20, "linear", 1e-3, 0.2)
    batch = TrainBatch(
        x0=dataset.images,
        conditions=dataset.condition_tensors(range(3)),
        steps=np.array([1, 7, 20], dtype=np.int64),
        indices=np.array([0, 3, 1], dtype=np.int64),
    )
    return DenoiserModel(TINY, seed=4), batch, bank, schedule


def test_conv_matches_direct_sum():
    rng = np.random.default_rng(0)
    conv = Conv2d("c", 2, 3, 3)
    params = conv.initialize(rng)
    params[conv.bias_key] = rng.standard_normal(3)
    x = rng.standard_normal((1, 2, 4, 5))
    out, _ = conv.forward(params, x)
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    weight = params[conv.weight_key]
    for o in range(3):
        for h in range(4):
            for w in range(5):
                expected = np.sum(padded[0, :, h : h + 3, w : w + 3] * weight[o])
                expected += params[conv.bias_key][o]
                assert out[0, o, h, w] == pytest.approx(expected, abs=1e-12)


def test_conv_rejects_even_kernel():
    with pytest.raises(ShapeError):
        Conv2d("c", 1, 1, 2)


def test_resampling_backward_is_adjoint():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 3, 4, 6))
    small = rng.standard_normal((2, 3, 2, 3))
    pool, up = AvgPool2(), Upsample2()
    pooled, _ = pool.forward({}, x)
    assert np.sum(pooled * small) == pytest.approx(np.sum(x * pool.backward({}, None, small)[0]))
    upsampled, _ = up.forward({}, small)
    assert np.sum(upsampled * x) == pytest.approx(np.sum(small * up.backward({}, None, x)[0]))


def test_pool_rejects_odd_size():
    with pytest.raises(ShapeError):
        AvgPool2().forward({}, np.zeros((1, 1, 3, 4)))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"widths": ()},
        {"widths": (0,)},
        {"kernel": 2},
        {"time_dim": 3},
        {"num_classes": 17},
        {"prediction": "v"},
    ],
)
def test_invalid_architecture(kwargs):
    with pytest.raises(ConfigError):
        ArchitectureConfig(**kwargs)


def test_parameters_stored_as_float32(setup):
    model, *_ = setup
    assert all(value.dtype == np.float32 for value in model.parameters.values())
    assert model.parameter_count == model.flat_parameters().size


def test_zero_init_head_predicts_zero(setup):
    _, batch, _, _ = setup
    model = DenoiserModel(ArchitectureConfig(widths=(4, 8), time_dim=4), seed=0)
    out, _ = model.forward(batch.x0, batch.steps, batch.conditions)
    assert out.shape == batch.x0.shape
    assert np.all(out == 0.0)


def test_predict_noise_single_matches_batch(setup):
    model, batch, _, _ = setup
    batched = model.predict_noise(batch.x0, 5, batch.conditions)
    single = model.predict_noise(batch.x0[1], 5, batch.conditions[1])
    assert single.shape == batch.x0[1].shape
    assert np.allclose(single, batched[1], rtol=0, atol=1e-12)


def test_clean_image_head_needs_schedule(setup):
    _, batch, _, _ = setup
    model = DenoiserModel(ArchitectureConfig(widths=(4, 8), time_dim=4, prediction="x0"))
    with pytest.raises(ConfigError):
        model.predict_noise(batch.x0, 3, batch.conditions)


def test_zero_init_clean_image_head_predicts_scaled_input(setup):
    _, batch, _, schedule = setup
    config = ArchitectureConfig(widths=(4, 8), time_dim=4, prediction="x0")
    model = DenoiserModel(config, seed=0, schedule=schedule)
    out, _ = model.forward(batch.x0, batch.steps, batch.conditions)
    for b, t in enumerate(batch.steps):
        expected = batch.x0[b] / np.sqrt(1.0 - schedule.alpha_bar(int(t)))
        assert np.allclose(out[b], expected, rtol=1e-12, atol=0)
    with pytest.raises(ShapeError):
        model.predict_noise(batch.x0, schedule.T + 1, batch.conditions)


def test_clean_image_head_gradients_match_finite_differences(setup):
    _, batch, bank, schedule = setup
    config = ArchitectureConfig(widths=(4, 8), time_dim=4, zero_init_head=False, prediction="x0")
    model = DenoiserModel(config, seed=2, schedule=schedule)
    assert gradient_check(model, batch, bank, schedule, num_coordinates=60) < 1e-4


def test_one_example_is_memorised(setup):
    _, batch, bank, schedule = setup
    config = ArchitectureConfig(widths=(8, 16), time_dim=4, prediction="x0")
    model = DenoiserModel(config, seed=1, schedule=schedule)
    single = TrainBatch(
        x0=batch.x0[:1],
        conditions=batch.conditions[:1],
        steps=np.array([7], dtype=np.int64),
        indices=np.array([2], dtype=np.int64),
    )
    optimizer = Adam()
    losses = []
    for step in range(1, 2001):
        losses.append(train_step(model, single, bank, schedule, optimizer, 1e-3, step=step))
        if losses[-1] < 1e-2:
            break
    assert losses[-1] < 1e-2 < losses[0]


def test_model_rejects_bad_spatial_size():
    model = DenoiserModel(ArchitectureConfig(widths=(4, 8, 8), time_dim=0))
    with pytest.raises(ShapeError):
        model.predict_noise(np.zeros((3, 6, 6)), 1, np.zeros((6, 6, 6)))


def test_model_rejects_condition_mismatch(setup):
    model, batch, _, _ = setup
    with pytest.raises(ShapeError):
        model.forward(batch.x0, batch.steps, batch.conditions[:, :3])


def test_restricted_loss():
    assert restricted_loss(np.zeros(4), np.array([1.0, -1.0, 0.0, 2.0])) == 1.5
    with pytest.raises(ShapeError):
        restricted_loss(np.zeros(3), np.zeros(4))


def test_prepare_inputs_targets_are_bank_vectors(setup):
    _, batch, bank, schedule = setup
    _, targets = prepare_inputs(batch, bank, schedule)
    for b, index in enumerate(batch.indices):
        assert np.array_equal(targets[b], bank.vector(int(index)).astype(np.float64))


def test_batch_shape_validation(setup):
    _, batch, _, _ = setup
    with pytest.raises(ShapeError):
        TrainBatch(
            x0=batch.x0,
            conditions=batch.conditions,
            steps=batch.steps[:2],
            indices=batch.indices,
        )


def test_analytic_gradients_match_finite_differences(setup):
    model, batch, bank, schedule = setup
    assert gradient_check(model, batch, bank, schedule, num_coordinates=60) < 1e-4


def test_gradient_check_detects_scaled_gradient(setup, monkeypatch):
    model, batch, bank, schedule = setup
    original = training.loss_and_gradients
    doubled = next(iter(model.parameters))

    def skewed(*args, **kwargs):
        loss, grads = original(*args, **kwargs)
        return loss, {**grads, doubled: grads[doubled] * 2.0}

    monkeypatch.setattr(training, "loss_and_gradients", skewed)
    assert gradient_check(model, batch, bank, schedule, num_coordinates=60) > 0.1


@pytest.mark.parametrize("optimizer", ["sgd", "adam"])
def test_training_steps_reduce_loss(setup, optimizer):
    model, batch, bank, schedule = setup
    opt = build_optimizer(optimizer)
    lr = 1e-2 if optimizer == "adam" else 1e-3
    losses = [train_step(model, batch, bank, schedule, opt, lr, step=i) for i in range(25)]
    assert losses[-1] < losses[0]
    assert opt.step_count == 25


def test_train_step_leaves_old_parameters_untouched(setup):
    model, batch, bank, schedule = setup
    before = {key: value.copy() for key, value in model.parameters.items()}
    old_mapping = model.parameters
    train_step(model, batch, bank, schedule, SGD(), 1e-3)
    assert model.parameters is not old_mapping
    for key, value in before.items():
        assert np.array_equal(old_mapping[key], value)


def test_non_finite_update_raises(setup):
    model, batch, bank, schedule = setup
    with pytest.raises(TrainingDivergedError) as excinfo:
        train_step(model, batch, bank, schedule, SGD(), float("inf"), step=12)
    assert excinfo.value.step == 12


@pytest.mark.parametrize("optimizer", ["sgd", "adam"])
def test_diverged_update_leaves_optimizer_state_untouched(setup, optimizer):
    model, batch, bank, schedule = setup
    opt = build_optimizer(optimizer)
    train_step(model, batch, bank, schedule, opt, 1e-2, step=1)
    before = {key: value.copy() for key, value in opt.state_arrays().items()}
    parameters = model.parameters
    twin, twin_opt = model.copy(), build_optimizer(optimizer)
    twin_opt.load_state(opt.step_count, before)

    with pytest.raises(TrainingDivergedError):
        train_step(model, batch, bank, schedule, opt, float("inf"), step=2)

    assert opt.step_count == 1
    assert model.parameters is parameters
    assert opt.state_arrays().keys() == before.keys()
    for key, value in opt.state_arrays().items():
        assert np.array_equal(value, before[key])
    train_step(model, batch, bank, schedule, opt, 1e-2, step=2)
    train_step(twin, batch, bank, schedule, twin_opt, 1e-2, step=2)
    assert np.array_equal(model.flat_parameters(), twin.flat_parameters())


def test_unknown_optimizer():
    with pytest.raises(ConfigError):
        build_optimizer("rmsprop")


def test_checkpoint_round_trip(setup, tmp_path):
    model, batch, _, _ = setup
    path = save_checkpoint(model, tmp_path / "model.dgn")
    loaded = load_checkpoint(path)
    assert loaded.config == model.config
    assert np.array_equal(loaded.flat_parameters(), model.flat_parameters())
    expected = model.predict_noise(batch.x0, 3, batch.conditions)
    assert np.array_equal(loaded.predict_noise(batch.x0, 3, batch.conditions), expected)


def test_checkpoint_keeps_clean_image_head(setup, tmp_path):
    _, batch, _, schedule = setup
    config = ArchitectureConfig(widths=(4, 8), time_dim=4, zero_init_head=False, prediction="x0")
    model = DenoiserModel(config, seed=6, schedule=schedule)
    path = save_checkpoint(model, tmp_path / "model.dgn")
    loaded = load_checkpoint(path, schedule)
    assert loaded.config.prediction == "x0"
    expected = model.predict_noise(batch.x0, 4, batch.conditions)
    assert np.array_equal(loaded.predict_noise(batch.x0, 4, batch.conditions), expected)


def test_checkpoint_corruption(setup, tmp_path):
    model, *_ = setup
    path = save_checkpoint(model, tmp_path / "model.dgn")
    data = path.read_bytes()
    path.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        load_checkpoint(path)
    path.write_bytes(data[:-8])
    with pytest.raises(FormatError, match="truncated"):
        load_checkpoint(path)


def test_adam_state_round_trip(setup, tmp_path):
    model, batch, bank, schedule = setup
    optimizer = Adam()
    for step in range(2):
        train_step(model, batch, bank, schedule, optimizer, 1e-2, step=step)
    path = save_optimizer_state(optimizer, model, tmp_path / "optimizer.opt")
    restored = load_optimizer_state(path, model)
    assert isinstance(restored, Adam)
    assert restored.step_count == 2

    twin = model.copy()
    train_step(model, batch, bank, schedule, optimizer, 1e-2)
    train_step(twin, batch, bank, schedule, restored, 1e-2)
    assert np.array_equal(model.flat_parameters(), twin.flat_parameters())


def test_sgd_state_has_no_moments(setup, tmp_path):
    model, *_ = setup
    optimizer = SGD()
    optimizer.step_count = 7
    restored = load_optimizer_state(
        save_optimizer_state(optimizer, model, tmp_path / "sgd.opt"), model
    )
    assert isinstance(restored, SGD)
    assert restored.step_count == 7
