"""
Ranking and unranking of block and single-element placements.

Combinations are ordered lexicographically. A placement of K_b non-overlapping
length-L blocks in N positions is in bijection with a K_b-subset of
N - K_b(L-1) positions (stars and bars): start_i = c_i + i(L-1).
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from coding.params import SystemConfig, bit_budget, block_placement_count
from utils.errors import InvalidSupportError


@dataclass(frozen=True)
class BlockPlacement:
    """Ascending, non-overlapping block start positions (0-based)."""

    starts: Tuple[int, ...]
    block_length: int

    def positions(self) -> np.ndarray:
        """All positions covered by the blocks, ascending."""
        if not self.starts:
            return np.zeros(0, dtype=int)
        offsets = np.arange(self.block_length)
        return (np.asarray(self.starts)[:, None] + offsets[None, :]).ravel()


@dataclass(frozen=True)
class SinglePlacement:
    """Ascending single-element positions (0-based)."""

    positions: Tuple[int, ...]


def combination_unrank(rank: int, n: int, k: int) -> Tuple[int, ...]:
    """
    The rank-th k-subset of {0..n-1} in lexicographic order.

    :raises ValueError: rank outside [0, C(n, k))
    """
    if k < 0 or n < 0:
        raise ValueError(f"n and k must be non-negative (n={n}, k={k})")
    total = math.comb(n, k)
    if not 0 <= rank < total:
        raise ValueError(f"rank exceeds combination count (rank={rank}, C({n},{k})={total})")

    subset = []
    candidate = 0
    for i in range(k):
        remaining = k - i - 1
        if remaining == 0:
            # the last element is reached by a direct offset
            subset.append(candidate + rank)
            break
        while True:
            count = math.comb(n - candidate - 1, remaining)
            if rank < count:
                break
            rank -= count
            candidate += 1
        subset.append(candidate)
        candidate += 1
    return tuple(subset)


def combination_rank(subset: Sequence[int], n: int) -> int:
    """
    Lexicographic rank of a strictly ascending subset of {0..n-1}.

    Uses the hockey-stick identity to sum the skipped combinations per element.

    :raises ValueError: subset not strictly ascending or out of range
    """
    values = [int(v) for v in subset]
    k = len(values)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"subset must be strictly ascending, got {values}")
    if values and (values[0] < 0 or values[-1] >= n):
        raise ValueError(f"subset elements must lie in [0, {n}), got {values}")

    rank = 0
    lowest = 0
    for i, value in enumerate(values):
        tail = k - i
        rank += math.comb(n - lowest, tail) - math.comb(n - value, tail)
        lowest = value + 1
    return rank


def block_placement_from_rank(rank: int, cfg: SystemConfig) -> BlockPlacement:
    """
    Unrank over the full range [0, C(N - K_b(L-1), K_b)) without the bit-budget cap.
    """
    reduced = cfg.n - cfg.k_b * (cfg.l - 1)
    combination = combination_unrank(rank, reduced, cfg.k_b)
    starts = tuple(c + i * (cfg.l - 1) for i, c in enumerate(combination))
    return BlockPlacement(starts=starts, block_length=cfg.l)


def place_blocks(u: int, cfg: SystemConfig) -> BlockPlacement:
    """Map the block-index integer u (b_i1 bits) to a block placement."""
    limit = 1 << bit_budget(cfg).b_i1
    if not 0 <= u < limit:
        raise ValueError(f"block index u={u} outside [0, 2^b_i1={limit})")
    return block_placement_from_rank(u, cfg)


def check_block_placement(placement: BlockPlacement, cfg: SystemConfig) -> None:
    """Raise InvalidSupportError unless the placement is structurally well formed."""
    starts = list(placement.starts)
    if placement.block_length != cfg.l or len(starts) != cfg.k_b:
        raise InvalidSupportError(
            f"expected {cfg.k_b} blocks of length {cfg.l}, got {len(starts)} of length {placement.block_length}"
        )
    if starts and (starts[0] < 0 or starts[-1] > cfg.n - cfg.l):
        raise InvalidSupportError(f"block starts {starts} leave [0, {cfg.n})")
    if any(b < a + cfg.l for a, b in zip(starts, starts[1:])):
        raise InvalidSupportError(f"blocks at {starts} overlap or are unordered")


def block_rank(placement: BlockPlacement, cfg: SystemConfig) -> int:
    """
    Inverse of place_blocks.

    :raises InvalidSupportError: malformed placement or rank >= 2^b_i1
    """
    check_block_placement(placement, cfg)
    reduced = cfg.n - cfg.k_b * (cfg.l - 1)
    combination = [s - i * (cfg.l - 1) for i, s in enumerate(placement.starts)]
    rank = combination_rank(combination, reduced)
    if rank >= 1 << bit_budget(cfg).b_i1:
        raise InvalidSupportError(
            f"unrepresentable placement (rank {rank} >= 2^b_i1, {block_placement_count(cfg)} placements)"
        )
    return rank


def available_single_positions(placement: BlockPlacement, cfg: SystemConfig) -> np.ndarray:
    """
    Positions left for single elements: everything except blocks and their guards.

    The guards are start-1 and start+L, clipped to [0, N).
    """
    free = np.ones(cfg.n, dtype=bool)
    for start in placement.starts:
        free[max(start - 1, 0) : min(start + placement.block_length + 1, cfg.n)] = False
    return np.flatnonzero(free)


def place_singles(v: int, available: Sequence[int], cfg: SystemConfig) -> SinglePlacement:
    """Map the single-index integer v (b_i2 bits) onto the available positions."""
    limit = 1 << bit_budget(cfg).b_i2
    if not 0 <= v < limit:
        raise ValueError(f"single index v={v} outside [0, 2^b_i2={limit})")
    available = np.asarray(available, dtype=int)
    indexes = combination_unrank(v, len(available), cfg.k_s)
    return SinglePlacement(positions=tuple(int(available[i]) for i in indexes))


def single_rank(placement: SinglePlacement, available: Sequence[int], cfg: SystemConfig) -> int:
    """
    Inverse of place_singles.

    :raises InvalidSupportError: wrong count, a position inside a block or guard,
        or rank >= 2^b_i2
    """
    positions = list(placement.positions)
    if len(positions) != cfg.k_s:
        raise InvalidSupportError(f"expected {cfg.k_s} single positions, got {len(positions)}")
    available = np.asarray(available, dtype=int)
    indexes = np.searchsorted(available, positions)
    for position, index in zip(positions, indexes):
        if index >= len(available) or available[index] != position:
            raise InvalidSupportError(f"single position {position} lies in a block or guard")
    try:
        rank = combination_rank(indexes.tolist(), len(available))
    except ValueError as exc:
        raise InvalidSupportError(str(exc)) from exc
    if rank >= 1 << bit_budget(cfg).b_i2:
        raise InvalidSupportError(f"unrepresentable single placement (rank {rank} >= 2^b_i2)")
    return rank
