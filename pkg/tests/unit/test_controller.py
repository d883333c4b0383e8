from __future__ import annotations

import numpy as np
import pytest

from nrdiff_core.bank import build_bank
from nrdiff_core.controller import (
    STOP_EARLY,
    STOP_MAX_STEPS,
    TrainingConfig,
    TrainingLog,
    evaluate_checkpoint,
    load_training_state,
    make_batch,
    run_training,
    should_stop,
)
from nrdiff_core.config import RunConfig, schedule_from
from nrdiff_core.diffusion import build_schedule
from nrdiff_core.errors import ConfigError, FormatError
from nrdiff_core.models import ArchitectureConfig, DenoiserModel
from nrdiff_core.semantics import SceneParams, generate_dataset

TINY = ArchitectureConfig(widths=(4, 8), time_dim=4, zero_init_head=False)


def _config(**overrides):
    base = dict(
        target_score=0.25,
        check_interval=3,
        validation_size=1,
        max_steps=6,
        batch_size=2,
        learning_rate=1e-3,
        optimizer="adam",
        seed=5,
        bank_seed=9,
        bank_size=4,
        schedule=build_schedule(10, "linear", 1e-3, 0.2),
        architecture=TINY,
    )
    base.update(overrides)
    return TrainingConfig(**base)


@pytest.fixture
def dataset():
    return generate_dataset(5, 40, SceneParams(height=16, width=16))


class ScriptedScorer:
    """Returns the queued scores in order and remembers the calls."""

    def __init__(self, *scores):
        self.scores = list(scores)
        self.calls = 0

    def __call__(self, model, bank, schedule, validation, seed):
        self.calls += 1
        return self.scores.pop(0) if self.scores else 1.0


@pytest.mark.parametrize(
    "score, threshold, expected",
    [(0.2, 0.25, True), (0.25, 0.25, True), (0.26, 0.25, False), (0.0, 0.0, True)],
)
def test_should_stop(score, threshold, expected):
    assert should_stop(score, threshold) is expected


@pytest.mark.parametrize(
    "overrides",
    [
        {"check_interval": 0},
        {"validation_size": 0},
        {"target_score": -0.1},
        {"target_score": float("nan")},
        {"batch_size": 0},
        {"noise_mode": "uniform"},
    ],
)
def test_invalid_training_config(overrides):
    with pytest.raises(ConfigError):
        _config(**overrides)


def test_default_schedule_ends_near_pure_noise():
    schedule = TrainingConfig().schedule
    assert schedule.T == 100
    assert np.sqrt(schedule.alpha_bar(100)) < 0.01
    assert np.array_equal(schedule.betas, schedule_from(RunConfig()).betas)


def test_batches_are_deterministic_per_step(dataset):
    config = _config()
    bank = build_bank(config.bank_seed, config.bank_size, dataset.image_shape)
    first = make_batch(dataset, config, bank, 7)
    second = make_batch(dataset, config, bank, 7)
    assert np.array_equal(first.x0, second.x0)
    assert np.array_equal(first.steps, second.steps)
    assert np.array_equal(first.indices, second.indices)
    assert np.all((first.steps >= 1) & (first.steps <= config.schedule.T))
    assert np.all((first.indices >= 0) & (first.indices < bank.N))


def test_each_epoch_visits_every_scene_once(dataset):
    config = _config(batch_size=2)
    bank = build_bank(config.bank_seed, config.bank_size, dataset.image_shape)
    seen = np.concatenate([make_batch(dataset, config, bank, step).x0 for step in (1, 2, 3)])
    assert seen.shape[0] == len(dataset)
    for image in dataset.images:
        assert sum(np.array_equal(image, other) for other in seen) == 1


def test_gaussian_mode_batches_carry_fresh_noise(dataset):
    config = _config(noise_mode="gaussian")
    bank = build_bank(config.bank_seed, config.bank_size, dataset.image_shape)
    batch = make_batch(dataset, config, bank, 1)
    assert batch.noise is not None
    assert batch.noise.shape == batch.x0.shape


def test_early_stop_at_first_passing_check(dataset):
    scorer = ScriptedScorer(0.5, 0.2, 0.1)
    result = run_training(dataset, _config(max_steps=30), scorer=scorer)
    assert result.log.stop_reason == STOP_EARLY
    assert result.log.steps_run == 6
    assert result.log.stop_step == 6
    assert [check.step for check in result.log.checks] == [3, 6]
    assert [check.stopped for check in result.log.checks] == [False, True]
    assert scorer.calls == 2


def test_runs_to_max_steps_without_passing_check(dataset):
    result = run_training(dataset, _config(max_steps=7), scorer=ScriptedScorer())
    assert result.log.stop_reason == STOP_MAX_STEPS
    assert result.log.steps_run == 7
    assert len(result.log.checks) == 2
    assert result.bank.N == 4


def test_zero_step_budget(dataset):
    result = run_training(dataset, _config(max_steps=0), scorer=ScriptedScorer())
    assert result.log.steps_run == 0
    assert result.log.stop_reason == STOP_MAX_STEPS


def test_training_is_reproducible(dataset):
    first = run_training(dataset, _config(), scorer=ScriptedScorer())
    second = run_training(dataset, _config(), scorer=ScriptedScorer())
    assert first.log.losses == second.log.losses
    assert np.array_equal(first.model.flat_parameters(), second.model.flat_parameters())


def test_resume_matches_uninterrupted_run(dataset, tmp_path):
    full = run_training(dataset, _config(max_steps=6), scorer=ScriptedScorer())

    checkpoints = tmp_path / "checkpoints"
    run_training(
        dataset, _config(max_steps=3), scorer=ScriptedScorer(), checkpoint_dir=checkpoints
    )
    resumed = run_training(
        dataset, _config(max_steps=6), scorer=ScriptedScorer(), resume_from=checkpoints
    )
    assert resumed.log.steps_run == 6
    assert np.array_equal(resumed.model.flat_parameters(), full.model.flat_parameters())
    assert resumed.log.losses[3:] == full.log.losses[3:]


def test_resume_rejects_other_architecture(dataset, tmp_path):
    checkpoints = tmp_path / "checkpoints"
    run_training(
        dataset, _config(max_steps=3), scorer=ScriptedScorer(), checkpoint_dir=checkpoints
    )
    other = ArchitectureConfig(widths=(4,), time_dim=4, zero_init_head=False)
    with pytest.raises(ConfigError):
        run_training(
            dataset,
            _config(architecture=other),
            scorer=ScriptedScorer(),
            resume_from=checkpoints,
        )


def test_checkpoint_dir_contents(dataset, tmp_path):
    checkpoints = tmp_path / "checkpoints"
    run_training(
        dataset, _config(max_steps=6), scorer=ScriptedScorer(0.9, 0.4), checkpoint_dir=checkpoints
    )
    for name in ("latest.dgn", "best.dgn", "optimizer.opt", "loss.csv", "checks.csv", "state.env"):
        assert (checkpoints / name).exists()
    state = load_training_state(checkpoints)
    assert state.step == 6
    assert state.best_score == pytest.approx(0.4)


def test_missing_training_state(tmp_path):
    with pytest.raises(FormatError):
        load_training_state(tmp_path)


def test_evaluate_checkpoint_is_thread_independent(dataset):
    model = DenoiserModel(TINY, seed=2)
    bank = build_bank(3, 4, dataset.image_shape)
    schedule = build_schedule(5, "linear", 1e-2, 0.3)
    validation = dataset.subset([0, 1, 2])
    serial = evaluate_checkpoint(model, bank, schedule, validation, seed=1)
    threaded = evaluate_checkpoint(model, bank, schedule, validation, seed=1, threads=3)
    assert serial == threaded
    assert 0.0 <= serial <= 1.0


def test_training_log_ordering_and_round_trip(tmp_path):
    log = TrainingLog()
    log.record_loss(1, 0.5)
    log.record_loss(2, 0.25)
    with pytest.raises(ConfigError):
        log.record_loss(4, 0.1)
    log.record_check(2, 0.3, False)
    with pytest.raises(ConfigError):
        log.record_check(2, 0.2, True)
    log.write(tmp_path)
    loaded = TrainingLog.read(tmp_path)
    assert loaded.losses == [0.5, 0.25]
    assert loaded.checks == log.checks
    assert loaded.best_check == log.checks[0]
