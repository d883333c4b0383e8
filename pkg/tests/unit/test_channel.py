from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrdiff_core.channel import (
    HEADER_BITS,
    ChannelModel,
    CodecConfig,
    decode_packet,
    encode_packet,
    flip_mask,
    index_bit_width,
    packet_from_bytes,
    packet_layout,
    packet_to_bytes,
    payload_report,
    repeat_decode,
    repeat_encode,
    transmit,
)
from nrdiff_core.errors import ConfigError, FormatError, PacketLostError, ShapeError
from nrdiff_core.semantics import NUM_CLASSES, SemanticCondition, extract_conditions, generate_scene


def _condition(seed=0, H=4, W=4, K=5):
    rng = np.random.default_rng(seed)
    return SemanticCondition(
        segmentation=rng.integers(0, K, size=(H, W)).astype(np.uint8),
        edges=rng.integers(0, 2, size=(H, W)).astype(np.uint8),
        num_classes=K,
    )


@pytest.mark.parametrize(
    "N, width", [(1, 0), (2, 1), (3, 2), (4, 2), (1000, 10), (1024, 10), (1025, 11)]
)
def test_index_bit_width(N, width):
    assert index_bit_width(N) == width


def test_index_bit_width_rejects_empty_bank():
    with pytest.raises(ConfigError):
        index_bit_width(0)


def test_header_is_fixed_size():
    assert HEADER_BITS == 104


def test_packet_layout_sizes():
    m = _condition(H=4, W=6)
    layout = packet_layout(m, 1000, CodecConfig(weak_code="rep3"))
    assert layout.condition_bits == 4 * 6 * 5
    assert layout.index_bits == 10
    assert layout.strong_span == (0, (104 + 120) * 5)
    assert layout.total_bits == (104 + 120) * 5 + 30
    assert encode_packet(m, 7, 1000, CodecConfig(weak_code="rep3")).size == layout.total_bits


@settings(max_examples=60, deadline=None)
@given(
    H=st.integers(1, 9),
    W=st.integers(1, 9),
    K=st.integers(1, 16),
    N=st.integers(1, 5000),
    data=st.data(),
    run_length=st.booleans(),
    weak_code=st.sampled_from(["none", "rep3"]),
)
def test_noiseless_round_trip(H, W, K, N, data, run_length, weak_code):
    seed = data.draw(st.integers(0, 2**32 - 1))
    index = data.draw(st.integers(0, N - 1))
    m = _condition(seed, H, W, K)
    config = CodecConfig(weak_code=weak_code, run_length=run_length)
    wire = packet_to_bytes(encode_packet(m, index, N, config))
    decoded, decoded_index, diagnostics = decode_packet(packet_from_bytes(wire), config)
    assert decoded == m
    assert decoded_index == index
    assert diagnostics.strong_corrected == 0
    assert diagnostics.run_length is run_length


def test_run_length_shrinks_layout_payload():
    scene = generate_scene(4)
    m = extract_conditions(scene.image, scene.labels, NUM_CLASSES)
    plain = packet_layout(m, 1000, CodecConfig())
    packed = packet_layout(m, 1000, CodecConfig(run_length=True))
    assert packed.condition_bits < plain.condition_bits


def test_repetition_code_corrects_every_two_bit_pattern():
    message = np.random.default_rng(3).integers(0, 2, size=16).astype(np.uint8)
    coded = repeat_encode(message, 5)
    positions = range(coded.size)
    patterns = itertools.chain(
        ((),), ((a,) for a in positions), itertools.combinations(positions, 2)
    )
    for pattern in patterns:
        received = coded.copy()
        received[list(pattern)] ^= 1
        decoded, corrected = repeat_decode(received, 5)
        assert np.array_equal(decoded, message)
        assert corrected == len({position // 5 for position in pattern})


def test_packet_survives_any_single_strong_flip():
    m = _condition(1, H=3, W=3)
    bits = encode_packet(m, 5, 8)
    stop = packet_layout(m, 8).strong_span[1]
    for position in range(stop):
        received = bits.copy()
        received[position] ^= 1
        decoded, index, diagnostics = decode_packet(received)
        assert decoded == m and index == 5
        assert diagnostics.strong_corrected == 1


def test_packet_survives_sampled_two_bit_strong_errors():
    m = _condition(2, H=3, W=3)
    bits = encode_packet(m, 3, 8)
    stop = packet_layout(m, 8).strong_span[1]
    rng = np.random.default_rng(0)
    for _ in range(500):
        received = bits.copy()
        received[rng.choice(stop, size=2, replace=False)] ^= 1
        decoded, index, _ = decode_packet(received)
        assert decoded == m and index == 3


def test_index_stays_in_range_on_noisy_channel():
    m = _condition(4)
    N = 1000
    config = CodecConfig()
    bits = encode_packet(m, 999, N, config)
    region = packet_layout(m, N, config).index_span
    wrapped = 0
    for trial in range(1000):
        received = transmit(bits, ChannelModel(p=0.3, seed=trial), region=region)
        decoded, index, diagnostics = decode_packet(received, config)
        assert decoded == m
        assert 0 <= index < N
        wrapped += diagnostics.index_wrapped
    assert wrapped > 0


def test_corrupted_version_group_loses_packet():
    bits = encode_packet(_condition(), 1, 4)
    # Bit 3 is the version LSB; flipping three of its five copies outvotes it.
    bits[15:18] ^= 1
    with pytest.raises(PacketLostError):
        decode_packet(bits)


def test_truncated_packet_is_lost():
    bits = encode_packet(_condition(), 1, 4)
    with pytest.raises(PacketLostError):
        decode_packet(bits[: HEADER_BITS * 5 - 1])
    with pytest.raises(PacketLostError):
        decode_packet(bits[:-3])


def test_empty_wire_packet():
    with pytest.raises(FormatError):
        packet_from_bytes(b"")


def test_encode_rejects_out_of_range_index():
    with pytest.raises(ShapeError):
        encode_packet(_condition(), 4, 4)


def test_invalid_codec_config():
    with pytest.raises(ConfigError):
        CodecConfig(strong_repetition=4)
    with pytest.raises(ConfigError):
        CodecConfig(weak_code="hamming")


def test_channel_is_deterministic_and_length_preserving():
    bits = np.zeros(4000, dtype=np.uint8)
    channel = ChannelModel(p=0.1, seed=42)
    first = transmit(bits, channel)
    assert first.size == bits.size
    assert np.array_equal(first, transmit(bits, channel))
    assert np.array_equal(first, flip_mask(bits.size, channel))
    assert 0.08 < first.mean() < 0.12


def test_noiseless_channel_is_identity():
    bits = np.random.default_rng(1).integers(0, 2, size=100).astype(np.uint8)
    assert np.array_equal(transmit(bits, ChannelModel(p=0.0)), bits)


def test_channel_region_limits_flips():
    bits = np.zeros(1000, dtype=np.uint8)
    received = transmit(bits, ChannelModel(p=0.5, seed=7), region=(100, 200))
    assert not received[:100].any() and not received[200:].any()
    assert received[100:200].any()


@pytest.mark.parametrize("p", [-0.1, 0.6])
def test_invalid_crossover_probability(p):
    with pytest.raises(ConfigError):
        ChannelModel(p=p)


def test_payload_ratio_for_default_scene():
    scene = generate_scene(0)
    m = extract_conditions(scene.image, scene.labels, NUM_CLASSES)
    report = payload_report(m, 1000)
    assert report.raw_latent_bits == 3 * 32 * 32 * 32
    assert report.index_bits == 10
    assert report.index_ratio > 5000
    assert report.wire_bytes == (report.coded_total_bits + 7) // 8


def test_payload_ratio_single_entry_bank():
    report = payload_report(_condition(), 1)
    assert report.index_bits == 0
    assert report.index_ratio == report.raw_latent_bits
