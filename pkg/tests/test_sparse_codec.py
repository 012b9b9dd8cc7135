import numpy as np
import pytest

from coding.combinadics import BlockPlacement, SinglePlacement, block_placement_from_rank
from coding.modem import build_alphabet
from coding.params import SystemConfig, bit_budget
from coding.sparse_codec import Packet, demap, encode, partition_unstructured_support
from utils.errors import InvalidSupportError

SMALL_CONFIGS = [
    SystemConfig(n=12, m=8, k_b=1, l=2, k_s=1, alpha=0.5),
    SystemConfig(n=16, m=8, k_b=1, l=2, k_s=2, mod_order=16),
    SystemConfig(n=18, m=12, k_b=2, l=3, k_s=1),
    SystemConfig(n=24, m=12, k_b=2, l=2, k_s=2, mod_order=64),
    SystemConfig(n=20, m=10, k_b=1, l=5, k_s=0),
    SystemConfig(n=30, m=12, k_b=3, l=2, k_s=1, alpha=0.7),
    SystemConfig(n=21, m=8, k_b=1, l=3, k_s=3),
    SystemConfig(n=64, m=16, k_b=1, l=4, k_s=2, mod_order=16),
    SystemConfig(n=10, m=6, k_b=2, l=1, k_s=1),
    SystemConfig(n=128, m=64, k_b=1, l=3, k_s=1),
]


def test_all_zero_packet():
    cfg = SMALL_CONFIGS[0]
    packet = Packet(np.zeros(bit_budget(cfg).b_total, dtype=np.uint8))
    s = encode(packet, cfg)
    a0 = build_alphabet(4).points[0]
    assert s.block_placement.starts == (0,)
    assert s.single_placement.positions == (3,)
    assert s.values[0] == pytest.approx(np.sqrt(0.5) * a0)
    assert s.values[3] == pytest.approx(np.sqrt(0.5) * a0)
    assert s.values[2] == 0


def test_encode_rejects_wrong_length():
    cfg = SMALL_CONFIGS[0]
    with pytest.raises(ValueError):
        encode(Packet(np.zeros(bit_budget(cfg).b_total + 1, dtype=np.uint8)), cfg)


@pytest.mark.parametrize("cfg", SMALL_CONFIGS)
def test_encode_demap_round_trip(cfg):
    rng = np.random.default_rng(cfg.n * 31 + cfg.k_s)
    for _ in range(1000):
        packet = Packet.random(rng, cfg)
        s = encode(packet, cfg)
        assert np.count_nonzero(s.values) == cfg.k_total
        recovered = demap(s.block_placement, s.single_placement, s.block_symbols, s.single_symbols, cfg)
        assert recovered == packet


def test_encode_is_deterministic():
    cfg = SMALL_CONFIGS[2]
    packet = Packet.random(np.random.default_rng(3), cfg)
    first, second = encode(packet, cfg), encode(packet, cfg)
    np.testing.assert_array_equal(first.values, second.values)


def test_values_follow_power_split():
    cfg = SMALL_CONFIGS[1]
    s = encode(Packet.random(np.random.default_rng(4), cfg), cfg)
    np.testing.assert_allclose(s.values[s.block_placement.positions()], np.sqrt(cfg.alpha) * s.block_symbols)
    np.testing.assert_allclose(
        s.values[list(s.single_placement.positions)], np.sqrt(1 - cfg.alpha) * s.single_symbols
    )


def test_expected_energy_and_power_split():
    cfg = SystemConfig(n=64, m=16, k_b=1, l=4, k_s=2, mod_order=16, alpha=0.6)
    rng = np.random.default_rng(5)
    energies, block_energy, single_energy = [], [], []
    for _ in range(4000):
        s = encode(Packet.random(rng, cfg), cfg)
        energies.append(np.sum(np.abs(s.values) ** 2))
        block_energy.append(np.sum(np.abs(s.values[s.block_placement.positions()]) ** 2))
        single_energy.append(np.sum(np.abs(s.values[list(s.single_placement.positions)]) ** 2))
    energies = np.asarray(energies)
    expected = cfg.alpha * cfg.k_b * cfg.l + (1 - cfg.alpha) * cfg.k_s
    standard_error = energies.std(ddof=1) / np.sqrt(energies.size)
    assert abs(energies.mean() - expected) < 4 * standard_error + 1e-12
    ratio = np.mean(block_energy) / np.mean(single_energy)
    assert ratio == pytest.approx(cfg.alpha * cfg.k_b * cfg.l / ((1 - cfg.alpha) * cfg.k_s), rel=0.05)


def test_packet_hex_round_trip():
    cfg = SystemConfig(n=2100, m=80, k_b=1, l=3, k_s=1)
    packet = Packet.random(np.random.default_rng(6), cfg)
    text = packet.to_hex()
    assert len(text) == 8
    assert Packet.from_hex(text, 30) == packet
    with pytest.raises(ValueError):
        Packet.from_hex(text + "00", 30)


def test_demap_rejects_single_in_guard():
    cfg = SMALL_CONFIGS[0]
    blocks = BlockPlacement(starts=(4,), block_length=2)
    symbols = build_alphabet(4).points[:2]
    with pytest.raises(InvalidSupportError):
        demap(blocks, SinglePlacement(positions=(6,)), symbols, symbols[:1], cfg)


def test_demap_rejects_unrepresentable_blocks():
    cfg = SMALL_CONFIGS[0]
    budget = bit_budget(cfg)
    assert 2**budget.b_i1 < 11
    blocks = block_placement_from_rank(2**budget.b_i1, cfg)
    symbols = build_alphabet(4).points[:2]
    with pytest.raises(InvalidSupportError, match="unrepresentable"):
        demap(blocks, SinglePlacement(positions=(0,)), symbols, symbols[:1], cfg)


def test_partition_block_and_single():
    cfg = SystemConfig(n=12, m=8, k_b=1, l=2, k_s=1)
    blocks, singles = partition_unstructured_support([0, 1, 5], cfg)
    assert blocks.starts == (0,)
    assert singles.positions == (5,)


def test_partition_rejects_long_run():
    cfg = SystemConfig(n=12, m=8, k_b=1, l=2, k_s=1)
    with pytest.raises(InvalidSupportError):
        partition_unstructured_support([0, 1, 2], cfg)
    with pytest.raises(InvalidSupportError):
        partition_unstructured_support([3, 4, 5], cfg)


def test_partition_rejects_wrong_counts():
    cfg = SystemConfig(n=12, m=8, k_b=1, l=2, k_s=1)
    with pytest.raises(InvalidSupportError):
        partition_unstructured_support([0, 4, 8], cfg)
    with pytest.raises(InvalidSupportError):
        partition_unstructured_support([0, 1], cfg)


def test_partition_splits_adjacent_blocks():
    cfg = SystemConfig(n=18, m=12, k_b=2, l=3, k_s=1)
    blocks, singles = partition_unstructured_support([2, 3, 4, 5, 6, 7, 12], cfg)
    assert blocks.starts == (2, 5)
    assert singles.positions == (12,)


def test_partition_with_unit_blocks_takes_lowest_indexes():
    cfg = SystemConfig(n=10, m=6, k_b=2, l=1, k_s=1)
    blocks, singles = partition_unstructured_support([7, 1, 4], cfg)
    assert blocks.starts == (1, 4)
    assert singles.positions == (7,)


@pytest.mark.parametrize("cfg", [c for c in SMALL_CONFIGS if c.l > 1 and c.k_s <= 1])
def test_partition_recovers_encoded_supports(cfg):
    rng = np.random.default_rng(7)
    for _ in range(200):
        s = encode(Packet.random(rng, cfg), cfg)
        blocks, singles = partition_unstructured_support(s.support(), cfg)
        assert blocks == s.block_placement
        assert singles == s.single_placement
