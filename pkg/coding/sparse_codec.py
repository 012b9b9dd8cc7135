"""
DM-SVC packet mapping.

Packet bits are read big-endian as [u: b_i1 | v: b_i2 | symbol bits: b_s].
u selects the block placement, v the single positions among the positions
left free by the blocks and their guards, and the symbol bits are modulated
onto the block positions first, then the single positions, each ascending.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from coding.combinadics import (
    BlockPlacement,
    SinglePlacement,
    available_single_positions,
    block_rank,
    check_block_placement,
    place_blocks,
    place_singles,
    single_rank,
)
from coding.modem import build_alphabet, demodulate_nearest, modulate
from coding.params import SystemConfig, bit_budget
from utils.errors import InvalidSupportError


@dataclass(frozen=True, eq=False)
class Packet:
    """A packet of b_total information bits (uint8 0/1 values)."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).ravel()
        if np.any(bits > 1):
            raise ValueError("Packet bits must be 0 or 1.")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, Packet) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def to_hex(self) -> str:
        """Big-endian hex, zero-padded on the right to whole bytes."""
        return np.packbits(self.bits).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, n_bits: int) -> "Packet":
        text = text.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        expected = 2 * ((n_bits + 7) // 8)
        if len(text) != expected:
            raise ValueError(f"expected {expected} hex digits for {n_bits} bits, got {len(text)}")
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(text), dtype=np.uint8))
        if np.any(bits[n_bits:]):
            raise ValueError("padding bits after the packet must be zero")
        return cls(bits[:n_bits])

    @classmethod
    def random(cls, rng: np.random.Generator, cfg: SystemConfig) -> "Packet":
        return cls(rng.integers(0, 2, size=bit_budget(cfg).b_total, dtype=np.uint8))


@dataclass(frozen=True, eq=False)
class SparseVector:
    """
    The transmitted sparse vector s = sqrt(alpha) s1 + sqrt(1 - alpha) s2.

    block_symbols follow the block positions in ascending order,
    single_symbols the single positions in ascending order.
    """

    n: int
    block_placement: BlockPlacement
    single_placement: SinglePlacement
    block_symbols: np.ndarray
    single_symbols: np.ndarray
    values: np.ndarray

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)


def bits_to_int(bits: Sequence[int]) -> int:
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value


def int_to_bits(value: int, width: int) -> np.ndarray:
    if value < 0 or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return np.array([(value >> shift) & 1 for shift in range(width - 1, -1, -1)], dtype=np.uint8)


def assemble(
    block_placement: BlockPlacement,
    single_placement: SinglePlacement,
    block_symbols: np.ndarray,
    single_symbols: np.ndarray,
    cfg: SystemConfig,
) -> np.ndarray:
    """Merge both components into the length-N vector of values."""
    values = np.zeros(cfg.n, dtype=complex)
    values[block_placement.positions()] = np.sqrt(cfg.alpha) * np.asarray(block_symbols)
    values[list(single_placement.positions)] = np.sqrt(1.0 - cfg.alpha) * np.asarray(single_symbols)
    return values


def encode(packet: Packet, cfg: SystemConfig) -> SparseVector:
    """
    Map a packet onto its sparse vector.

    :raises ValueError: packet length differs from b_total
    """
    budget = bit_budget(cfg)
    if len(packet) != budget.b_total:
        raise ValueError(f"packet has {len(packet)} bits, expected b_total={budget.b_total}")

    bits = packet.bits
    u = bits_to_int(bits[: budget.b_i1])
    v = bits_to_int(bits[budget.b_i1 : budget.b_i1 + budget.b_i2])
    blocks = place_blocks(u, cfg)
    singles = place_singles(v, available_single_positions(blocks, cfg), cfg)

    symbols = modulate(bits[budget.b_i1 + budget.b_i2 :], build_alphabet(cfg.mod_order))
    block_symbols = symbols[: cfg.k_b * cfg.l]
    single_symbols = symbols[cfg.k_b * cfg.l :]
    values = assemble(blocks, singles, block_symbols, single_symbols, cfg)
    return SparseVector(
        n=cfg.n,
        block_placement=blocks,
        single_placement=singles,
        block_symbols=block_symbols,
        single_symbols=single_symbols,
        values=values,
    )


def demap(
    block_placement: BlockPlacement,
    single_placement: SinglePlacement,
    block_symbols: np.ndarray,
    single_symbols: np.ndarray,
    cfg: SystemConfig,
) -> Packet:
    """
    Recover the packet bits from supports and symbol decisions.

    Symbols are sliced to the nearest alphabet point, so raw estimates work too.

    :raises InvalidSupportError: a placement that the encoder never produces
    """
    budget = bit_budget(cfg)
    block_symbols = np.asarray(block_symbols, dtype=complex).ravel()
    single_symbols = np.asarray(single_symbols, dtype=complex).ravel()
    if block_symbols.size != cfg.k_b * cfg.l or single_symbols.size != cfg.k_s:
        raise ValueError(
            f"expected {cfg.k_b * cfg.l} block and {cfg.k_s} single symbols, "
            f"got {block_symbols.size} and {single_symbols.size}"
        )

    u = block_rank(block_placement, cfg)
    v = single_rank(single_placement, available_single_positions(block_placement, cfg), cfg)
    symbol_bits, _ = demodulate_nearest(
        np.concatenate([block_symbols, single_symbols]), build_alphabet(cfg.mod_order)
    )
    bits = np.concatenate(
        [int_to_bits(u, budget.b_i1), int_to_bits(v, budget.b_i2), symbol_bits]
    )
    return Packet(bits)


def _runs(support: np.ndarray):
    """Split an ascending index array into maximal runs of consecutive indexes."""
    if support.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(support) != 1) + 1
    return np.split(support, breaks)


def partition_unstructured_support(
    support: Sequence[int], cfg: SystemConfig
) -> Tuple[BlockPlacement, SinglePlacement]:
    """
    Split an unstructured support of size K_bL + K_s into blocks and singles.

    A run of j*L consecutive indexes is read as j adjacent blocks, a run of
    length one as a single. With L = 1 the K_b lowest indexes are the blocks.

    :raises InvalidSupportError: the support has no valid block/single reading
    """
    support = np.unique(np.asarray(support, dtype=int))
    if support.size != cfg.k_total:
        raise InvalidSupportError(f"support has {support.size} indexes, expected {cfg.k_total}")

    if cfg.l == 1:
        starts = tuple(int(p) for p in support[: cfg.k_b])
        singles = tuple(int(p) for p in support[cfg.k_b :])
    else:
        starts_list, singles_list = [], []
        for run in _runs(support):
            if run.size == 1:
                singles_list.append(int(run[0]))
            elif run.size % cfg.l == 0:
                starts_list.extend(int(p) for p in run[:: cfg.l])
            else:
                raise InvalidSupportError(
                    f"run {run[0]}..{run[-1]} of length {run.size} is neither a single nor whole blocks of {cfg.l}"
                )
        if len(starts_list) != cfg.k_b or len(singles_list) != cfg.k_s:
            raise InvalidSupportError(
                f"found {len(starts_list)} blocks and {len(singles_list)} singles, "
                f"expected {cfg.k_b} and {cfg.k_s}"
            )
        starts, singles = tuple(starts_list), tuple(singles_list)

    blocks = BlockPlacement(starts=starts, block_length=cfg.l)
    check_block_placement(blocks, cfg)
    free = available_single_positions(blocks, cfg)
    if not np.all(np.isin(singles, free)):
        raise InvalidSupportError(f"single positions {singles} violate the block guards")
    return blocks, SinglePlacement(positions=singles)
