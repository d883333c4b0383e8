from __future__ import annotations

import math

import numpy as np
import pytest

from nrdiff_core.analytics import (
    evaluate_pair,
    normalized_mutual_information,
    perceptual_proxy,
    psnr,
)
from nrdiff_core.analytics.quality import gradient_difference, structural_similarity
from nrdiff_core.errors import ConfigError, ShapeError
from nrdiff_core.semantics import generate_scene


def test_psnr_identical_images_hit_cap():
    x = np.linspace(-1, 1, 48).reshape(3, 4, 4)
    assert psnr(x, x) == 100.0
    assert psnr(x, x, cap=60.0) == 60.0


def test_psnr_known_value():
    a = np.zeros((3, 4, 4))
    b = np.full((3, 4, 4), 0.2)
    # MSE 0.04 with peak 2 gives 10 * log10(100)
    assert psnr(a, b) == pytest.approx(20.0)


def test_psnr_is_capped_for_tiny_errors():
    a = np.zeros(16)
    b = np.full(16, 1e-9)
    assert psnr(a, b) == 100.0


def test_psnr_validation():
    with pytest.raises(ShapeError):
        psnr(np.zeros(3), np.zeros(4))
    with pytest.raises(ConfigError):
        psnr(np.zeros(3), np.ones(3), peak=0.0)


def test_nmi_identity_and_independence():
    rng = np.random.default_rng(0)
    a = rng.uniform(-1, 1, 20_000)
    assert normalized_mutual_information(a, a) == pytest.approx(1.0)
    independent = normalized_mutual_information(a, rng.uniform(-1, 1, 20_000))
    assert 0.0 <= independent < 0.05


def test_nmi_is_symmetric_and_bounded():
    rng = np.random.default_rng(1)
    a = rng.uniform(-1, 1, 5000)
    b = np.clip(a + 0.3 * rng.standard_normal(5000), -1, 1)
    forward = normalized_mutual_information(a, b)
    assert forward == pytest.approx(normalized_mutual_information(b, a))
    assert 0.0 < forward < 1.0


def test_nmi_constant_inputs():
    flat = np.zeros(100)
    assert normalized_mutual_information(flat, flat) == 1.0
    assert normalized_mutual_information(flat, np.linspace(-1, 1, 100)) == 0.0


def test_nmi_needs_two_bins():
    with pytest.raises(ConfigError):
        normalized_mutual_information(np.zeros(4), np.zeros(4), bins=1)


def test_proxy_zero_only_for_identical_images():
    image = generate_scene(1).image
    assert perceptual_proxy(image, image) == 0.0
    shifted = np.clip(image + 0.05, -1, 1)
    assert perceptual_proxy(image, shifted) > 0.0


def test_proxy_orders_degradations():
    image = generate_scene(2).image
    rng = np.random.default_rng(2)
    mild = np.clip(image + 0.05 * rng.standard_normal(image.shape), -1, 1)
    heavy = np.clip(image + 0.6 * rng.standard_normal(image.shape), -1, 1)
    assert 0.0 < perceptual_proxy(image, mild) < perceptual_proxy(image, heavy) <= 1.0


def test_proxy_terms():
    image = generate_scene(3).image
    assert structural_similarity(image, image) == pytest.approx(1.0)
    assert gradient_difference(image, image) == 0.0
    assert gradient_difference(np.zeros((3, 1, 4)), np.ones((3, 1, 4))) == 0.0


def test_evaluate_pair_records():
    image = generate_scene(4).image
    other = generate_scene(5).image
    records = {record.name: record for record in evaluate_pair(image, other, cap=50.0)}
    assert set(records) == {"proxy", "psnr", "nmi"}
    assert records["psnr"].parameters == {"peak": 2.0, "cap": 50.0}
    assert len({record.inputs_digest for record in records.values()}) == 1
    assert all(math.isfinite(record.value) for record in records.values())
