from __future__ import annotations

import math

import numpy as np
import pytest

from nrdiff_core.bank import (
    NoiseBank,
    bank_statistics,
    build_bank,
    draw_training_noise,
    gaussian_radius,
    load_bank,
    regenerate_vector,
    save_bank,
    select_noise,
    theoretical_radius,
)
from nrdiff_core.diffusion import build_schedule, forward_diffuse
from nrdiff_core.errors import ConfigError, FormatError, ShapeError


def test_bank_is_reproducible_from_seed():
    first = build_bank(1234, 8, (3, 4, 4))
    second = build_bank(1234, 8, (3, 4, 4))
    assert first == second
    assert first.vectors.dtype == np.float32
    assert first != build_bank(1235, 8, (3, 4, 4))


def test_vector_regeneration_matches_bank():
    bank = build_bank(77, 5, (2, 3))
    for index in range(bank.N):
        assert np.array_equal(regenerate_vector(77, index, (2, 3)), bank.vector(index))


def test_single_vector_bank():
    bank = build_bank(0, 1, (3, 2, 2))
    assert bank.N == 1
    assert bank.vector(0).shape == (3, 2, 2)


@pytest.mark.parametrize("N, shape", [(0, (3, 2, 2)), (2, ()), (2, (3, 0, 2))])
def test_invalid_bank_rejected(N, shape):
    with pytest.raises(ConfigError):
        build_bank(0, N, shape)


def test_bank_index_out_of_range():
    bank = build_bank(0, 3, (2,))
    with pytest.raises(ShapeError):
        bank.vector(3)
    with pytest.raises(ShapeError):
        bank.vector(-1)


def test_bank_statistics_are_standard_normal():
    bank = build_bank(1234, 1000, (3, 8, 8))
    stats = bank_statistics(bank)
    assert stats.entries == 1000 * 192
    assert abs(stats.mean) < 5 / math.sqrt(stats.entries)
    assert abs(stats.variance - 1) < 5 * math.sqrt(2 / stats.entries)


def test_training_noise_draw_is_uniform_and_seeded():
    bank = build_bank(5, 4, (2,))
    indices = [draw_training_noise(bank, np.random.default_rng([1, i]))[0] for i in range(400)]
    assert set(indices) == {0, 1, 2, 3}
    index, vector = draw_training_noise(bank, np.random.default_rng(9))
    assert np.array_equal(vector, bank.vector(index))


def test_gaussian_radius_is_euclidean_norm():
    assert gaussian_radius(np.array([3.0, 4.0])) == 5.0
    assert gaussian_radius(np.zeros((2, 2))) == 0.0


def test_gaussian_radius_permutation_invariant():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(1000)
    assert gaussian_radius(x) == gaussian_radius(rng.permutation(x))


def test_radius_concentrates_near_sqrt_d():
    bank = build_bank(3, 200, (3, 32, 32))
    radii = np.array([gaussian_radius(bank.vector(i)) for i in range(bank.N)])
    target = theoretical_radius(bank.shape)
    assert target == pytest.approx(math.sqrt(3072), rel=1e-3)
    assert abs(radii.mean() / target - 1) < 0.01


def test_theoretical_radius_rejects_empty_shape():
    with pytest.raises(ShapeError):
        theoretical_radius((0,))


def _brute_force_index(bank, x0, schedule):
    target = theoretical_radius(bank.shape)
    gaps = [
        abs(gaussian_radius(forward_diffuse(x0, schedule.T, bank.vector(i), schedule)) - target)
        for i in range(bank.N)
    ]
    return int(np.argmin(gaps))


def test_selector_matches_brute_force():
    schedule = build_schedule(20, "linear", 1e-3, 0.2)
    rng = np.random.default_rng(2024)
    for trial in range(50):
        N = int(rng.integers(1, 65))
        shape = (3, 4, 4)
        bank = build_bank(int(rng.integers(2**32)), N, shape)
        x0 = rng.uniform(-1, 1, size=shape)
        report = select_noise(bank, x0, schedule)
        assert report.best_index == _brute_force_index(bank, x0, schedule)
        assert len(report.per_index_radius) == N
        assert report.best_radius == report.per_index_radius[report.best_index]


def test_selector_breaks_ties_toward_smallest_index():
    schedule = build_schedule(10, "linear", 1e-3, 0.2)
    rng = np.random.default_rng(8)
    base = rng.standard_normal(12).astype(np.float32)
    far = (base * 3).astype(np.float32)
    vectors = np.stack([far, rng.permutation(base), base, rng.permutation(base)]).reshape(
        4, 3, 2, 2
    )
    bank = NoiseBank(seed=0, size=4, shape=(3, 2, 2), vectors=vectors)
    x0 = np.full((3, 2, 2), 0.25)
    report = select_noise(bank, x0, schedule)
    assert report.per_index_radius[1] == report.per_index_radius[2]
    assert report.per_index_radius[2] == report.per_index_radius[3]
    assert report.best_index in (0, 1)


def test_selector_all_permuted_vectors_pick_first():
    schedule = build_schedule(10, "linear", 1e-3, 0.2)
    rng = np.random.default_rng(21)
    base = rng.standard_normal(12).astype(np.float32)
    vectors = np.stack([rng.permutation(base) for _ in range(5)]).reshape(5, 3, 2, 2)
    bank = NoiseBank(seed=0, size=5, shape=(3, 2, 2), vectors=vectors)
    report = select_noise(bank, np.full((3, 2, 2), -0.5), schedule)
    assert len(set(report.per_index_radius)) == 1
    assert report.best_index == 0


def test_selector_single_entry_bank():
    schedule = build_schedule(10)
    bank = build_bank(1, 1, (3, 2, 2))
    assert select_noise(bank, np.zeros((3, 2, 2)), schedule).best_index == 0


def test_selector_shape_mismatch():
    schedule = build_schedule(10)
    bank = build_bank(1, 2, (3, 2, 2))
    with pytest.raises(ShapeError):
        select_noise(bank, np.zeros((3, 2, 3)), schedule)


@pytest.mark.parametrize("mode", ["full", "seed"])
def test_bank_file_round_trip(tmp_path, mode):
    bank = build_bank(99, 6, (3, 4, 4))
    path = save_bank(bank, tmp_path / f"bank-{mode}.nbk", mode)
    assert load_bank(path) == bank


def test_seed_only_file_is_small(tmp_path):
    bank = build_bank(99, 50, (3, 8, 8))
    full = save_bank(bank, tmp_path / "full.nbk", "full").stat().st_size
    seed_only = save_bank(bank, tmp_path / "seed.nbk", "seed").stat().st_size
    assert seed_only < 64
    assert full > 50 * 192 * 4


def test_bank_file_bad_magic(tmp_path):
    path = save_bank(build_bank(1, 2, (2,)), tmp_path / "bank.nbk")
    data = bytearray(path.read_bytes())
    data[0:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError):
        load_bank(path)


def test_bank_file_bad_version(tmp_path):
    path = save_bank(build_bank(1, 2, (2,)), tmp_path / "bank.nbk")
    data = bytearray(path.read_bytes())
    data[4] = 9
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="version"):
        load_bank(path)


def test_bank_file_truncated(tmp_path):
    path = save_bank(build_bank(1, 4, (3, 2, 2)), tmp_path / "bank.nbk")
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(FormatError, match="truncated"):
        load_bank(path)


def test_bank_file_missing(tmp_path):
    with pytest.raises(FormatError):
        load_bank(tmp_path / "absent.nbk")


def test_unknown_bank_file_mode(tmp_path):
    with pytest.raises(ConfigError):
        save_bank(build_bank(1, 2, (2,)), tmp_path / "bank.nbk", "compressed")


def test_bank_file_trailing_bytes(tmp_path):
    path = save_bank(build_bank(1, 2, (2,)), tmp_path / "bank.nbk")
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(FormatError, match="trailing"):
        load_bank(path)
