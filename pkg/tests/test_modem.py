import numpy as np
import pytest

from coding.modem import build_alphabet, demodulate_nearest, modulate


def test_qpsk_points():
    alphabet = build_alphabet(4)
    expected = {complex(i, q) / np.sqrt(2) for i in (-1, 1) for q in (-1, 1)}
    assert alphabet.bits_per_symbol == 2
    for point in alphabet.points:
        assert min(abs(point - e) for e in expected) < 1e-15


@pytest.mark.parametrize("order", [4, 16, 64])
def test_unit_average_energy(order):
    points = build_alphabet(order).points
    assert np.mean(np.abs(points) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert len(set(np.round(points, 12))) == order


@pytest.mark.parametrize("order", [16, 64])
def test_grid_neighbours_differ_in_one_bit(order):
    alphabet = build_alphabet(order)
    points = alphabet.points
    step = np.min(np.abs(points[:, None] - points[None, :])[~np.eye(order, dtype=bool)])
    for a in range(order):
        for b in range(order):
            if a != b and abs(abs(points[a] - points[b]) - step) < 1e-9:
                assert bin(a ^ b).count("1") == 1


def test_unsupported_order():
    with pytest.raises(ValueError):
        build_alphabet(8)


def test_modulate_indexes_by_label():
    alphabet = build_alphabet(4)
    assert modulate(np.array([0, 0]), alphabet)[0] == alphabet.points[0]
    assert modulate(np.array([1, 0]), alphabet)[0] == alphabet.points[2]
    assert modulate(np.zeros(8, dtype=int), alphabet).size == 4


def test_modulate_rejects_partial_symbols():
    with pytest.raises(ValueError):
        modulate(np.zeros(3, dtype=int), build_alphabet(4))


@pytest.mark.parametrize("order", [4, 16, 64])
def test_demodulate_inverts_modulate(order):
    alphabet = build_alphabet(order)
    labels = np.arange(order)
    bits = alphabet.label_bits(labels).ravel()
    symbols = modulate(bits, alphabet)
    recovered_bits, recovered_symbols = demodulate_nearest(symbols, alphabet)
    np.testing.assert_array_equal(recovered_bits, bits)
    np.testing.assert_array_equal(recovered_symbols, symbols)


def test_demodulate_tie_goes_to_lowest_label():
    alphabet = build_alphabet(4)
    bits, symbol = demodulate_nearest(0j, alphabet)
    np.testing.assert_array_equal(bits, [0, 0])
    assert symbol[0] == alphabet.points[0]


@pytest.mark.parametrize("order", [4, 16, 64])
def test_small_perturbations_are_corrected(order):
    alphabet = build_alphabet(order)
    points = alphabet.points
    half_distance = np.min(np.abs(points[:, None] - points[None, :])[~np.eye(order, dtype=bool)]) / 2
    rng = np.random.default_rng(1)
    angles = rng.uniform(0, 2 * np.pi, order)
    noisy = points + 0.99 * half_distance * np.exp(1j * angles)
    _, recovered = demodulate_nearest(noisy, alphabet)
    np.testing.assert_array_equal(recovered, points)


def test_demodulate_is_idempotent():
    alphabet = build_alphabet(16)
    rng = np.random.default_rng(2)
    values = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    _, once = demodulate_nearest(values, alphabet)
    _, twice = demodulate_nearest(once, alphabet)
    np.testing.assert_array_equal(once, twice)
