from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np

from coding.params import SUPPORTED_MOD_ORDERS


@dataclass(frozen=True, eq=False)
class QamAlphabet:
    """
    Square QAM constellation indexed by its Gray label.

    points[label] is the symbol carrying ``label`` (big-endian bits, the upper
    half of the bits on the in-phase axis). Average energy is one.
    """

    order: int
    points: np.ndarray = field(repr=False)
    bits_per_symbol: int

    def label_bits(self, labels: np.ndarray) -> np.ndarray:
        """Big-endian bit matrix of shape (len(labels), bits_per_symbol)."""
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((np.asarray(labels)[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def _gray_to_binary(gray: np.ndarray) -> np.ndarray:
    binary = gray.copy()
    shift = gray >> 1
    while np.any(shift):
        binary ^= shift
        shift >>= 1
    return binary


@lru_cache(maxsize=None)
def build_alphabet(order: int) -> QamAlphabet:
    """
    Gray-labelled square QAM with unit average energy.

    :param order: 4, 16 or 64
    """
    if order not in SUPPORTED_MOD_ORDERS:
        raise ValueError(f"Unsupported QAM order {order}; expected one of {SUPPORTED_MOD_ORDERS}.")
    bits_per_symbol = int(order).bit_length() - 1
    bits_per_axis = bits_per_symbol // 2
    side = 1 << bits_per_axis

    labels = np.arange(order)
    in_phase = _gray_to_binary(labels >> bits_per_axis)
    quadrature = _gray_to_binary(labels & (side - 1))
    # levels -(side-1), ..., -1, 1, ..., side-1; average energy 2(order-1)/3
    points = (2 * in_phase - (side - 1)) + 1j * (2 * quadrature - (side - 1))
    points = points / np.sqrt(2.0 * (order - 1) / 3.0)
    points.setflags(write=False)
    return QamAlphabet(order=order, points=points, bits_per_symbol=bits_per_symbol)


def modulate(bits: np.ndarray, alphabet: QamAlphabet) -> np.ndarray:
    """
    Map consecutive big-endian bit groups onto alphabet points.

    :raises ValueError: bit count not a multiple of bits_per_symbol
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % alphabet.bits_per_symbol:
        raise ValueError(
            f"bit count {bits.size} is not a multiple of {alphabet.bits_per_symbol} bits per symbol"
        )
    weights = 1 << np.arange(alphabet.bits_per_symbol - 1, -1, -1)
    labels = bits.reshape(-1, alphabet.bits_per_symbol) @ weights
    return alphabet.points[labels]


def demodulate_nearest(values, alphabet: QamAlphabet) -> Tuple[np.ndarray, np.ndarray]:
    """
    Minimum-distance slicing of one value or an array of values.

    Exact ties go to the lowest label.

    :return: (flat big-endian label bits, nearest alphabet points)
    """
    values = np.atleast_1d(np.asarray(values, dtype=complex)).ravel()
    distances = np.abs(values[:, None] - alphabet.points[None, :]) ** 2
    labels = np.argmin(distances, axis=1)
    return alphabet.label_bits(labels).ravel(), alphabet.points[labels]
