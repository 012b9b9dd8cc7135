"""
Receivers for DM-SVC.

The two-stage decoder first finds the K_b blocks by block correlation, re-ranks
the best windows by least squares and refits jointly after every block. It
cancels the block component and finds the K_s singles with multipath matching
pursuit restricted to the positions the encoder can use. Up to l_p block sets
are completed this way and the decodable one with the smallest residual wins.
OMP and MMP over the whole vector are kept as baselines that ignore the block
structure.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from coding.combinadics import BlockPlacement, SinglePlacement, available_single_positions
from coding.modem import build_alphabet, demodulate_nearest
from coding.params import SystemConfig
from coding.sparse_codec import Packet, demap, partition_unstructured_support
from decoding.linalg import column_correlations, least_squares_on_support, residual_update
from utils.errors import InvalidSupportError, SingularSupportError
from utils.logger import logger

FAILURE_INVALID_SUPPORT = "invalid_support"
FAILURE_SINGULAR_SUPPORT = "singular_support"

# windows re-ranked by least squares per block iteration
BLOCK_SHORTLIST = 8

IndexSet = Union[Sequence[int], np.ndarray]


@dataclass(frozen=True, eq=False)
class Stage1Result:
    """
    Outcome of the block search.

    block_supports and block_estimates follow the selection order (per-block
    least squares on the residual of that iteration). block_values and
    block_symbols follow ascending block positions and come from the joint
    refit over all selected blocks.
    """

    block_placement: BlockPlacement
    block_supports: Tuple[np.ndarray, ...]
    block_estimates: Tuple[np.ndarray, ...]
    block_values: np.ndarray
    block_symbols: np.ndarray
    residual: np.ndarray
    residual_norms: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Stage2Result:
    support: np.ndarray
    values: np.ndarray
    symbols: np.ndarray


@dataclass(frozen=True, eq=False)
class DecodeResult:
    """A recovered packet or the kind of failure, plus the decisions made."""

    packet: Optional[Packet]
    failure: Optional[str] = None
    message: str = ""
    block_placement: Optional[BlockPlacement] = None
    single_placement: Optional[SinglePlacement] = None
    block_symbols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    single_symbols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    residual_norms: Tuple[float, ...] = ()

    @property
    def ok(self) -> bool:
        return self.failure is None


def _exclusion_mask(excluded: IndexSet, n: int) -> np.ndarray:
    excluded = np.asarray(excluded)
    if excluded.dtype == bool and excluded.shape == (n,):
        return excluded.copy()
    mask = np.zeros(n, dtype=bool)
    mask[excluded.astype(int)] = True
    return mask


def _window_scores(phi: np.ndarray, r: np.ndarray, l: int, excluded: IndexSet) -> np.ndarray:
    correlations = column_correlations(phi, r)
    scores = sliding_window_view(correlations, l).sum(axis=1)
    blocked = sliding_window_view(_exclusion_mask(excluded, phi.shape[1]), l).any(axis=1)
    return np.where(blocked, -np.inf, scores)


def block_search(
    phi: np.ndarray, r: np.ndarray, l: int, excluded: IndexSet = ()
) -> Tuple[int, float]:
    """
    Start of the length-l window with the largest summed column correlation.

    Windows touching an excluded index are skipped; ties go to the smallest start.

    :raises InvalidSupportError: no window avoids the excluded indexes
    """
    scores = _window_scores(phi, r, l, excluded)
    if not np.isfinite(scores).any():
        raise InvalidSupportError(f"no admissible block candidate of length {l}")
    start = int(np.argmax(scores))
    return start, float(scores[start])


def block_shortlist(
    phi: np.ndarray, r: np.ndarray, l: int, excluded: IndexSet = (), size: int = BLOCK_SHORTLIST
) -> np.ndarray:
    """
    Starts of the ``size`` best-scoring admissible windows, best first.

    The first entry is always the block_search winner.

    :raises InvalidSupportError: no window avoids the excluded indexes
    """
    scores = _window_scores(phi, r, l, excluded)
    order = np.argsort(-scores, kind="stable")[:size]
    order = order[np.isfinite(scores[order])]
    if order.size == 0:
        raise InvalidSupportError(f"no admissible block candidate of length {l}")
    return order


@dataclass(frozen=True, eq=False)
class _BlockPath:
    windows: Tuple[np.ndarray, ...]
    estimates: Tuple[np.ndarray, ...]
    beta: np.ndarray
    residual: np.ndarray
    residual_norms: Tuple[float, ...]

    @property
    def starts(self) -> Tuple[int, ...]:
        return tuple(sorted(int(w[0]) for w in self.windows))


def _extend_path(
    path: _BlockPath, start: int, y: np.ndarray, phi: np.ndarray, cfg: SystemConfig
) -> _BlockPath:
    window = np.arange(start, start + cfg.l)
    estimate = least_squares_on_support(phi, window, path.residual) / np.sqrt(cfg.alpha)
    windows = path.windows + (window,)
    accumulated = np.sort(np.concatenate(windows))
    beta = least_squares_on_support(phi, accumulated, y)
    residual = residual_update(y, phi, accumulated, beta)
    return _BlockPath(
        windows=windows,
        estimates=path.estimates + (estimate,),
        beta=beta,
        residual=residual,
        residual_norms=path.residual_norms + (float(np.linalg.norm(residual)),),
    )


def _stage1_result(path: _BlockPath, cfg: SystemConfig) -> Stage1Result:
    block_values = path.beta / np.sqrt(cfg.alpha)
    _, block_symbols = demodulate_nearest(block_values, build_alphabet(cfg.mod_order))
    return Stage1Result(
        block_placement=BlockPlacement(starts=path.starts, block_length=cfg.l),
        block_supports=path.windows,
        block_estimates=path.estimates,
        block_values=block_values,
        block_symbols=block_symbols,
        residual=path.residual,
        residual_norms=path.residual_norms,
    )


def stage1_paths(
    y: np.ndarray, phi: np.ndarray, cfg: SystemConfig, paths: int = 1, shortlist: int = BLOCK_SHORTLIST
) -> List[Stage1Result]:
    """
    Identify the K_b blocks, keeping the ``paths`` most likely block sets.

    Every block iteration takes the ``shortlist`` best windows by summed
    correlation with the path residual and ranks them by the least-squares
    residual of the joint refit over all blocks of the path. Block sets are
    deduplicated; ties go to the smaller starts.

    :return: at most ``paths`` results, smallest residual first
    """
    if paths < 1 or shortlist < 1:
        raise ValueError(f"paths and shortlist must be at least 1, got {paths} and {shortlist}")
    y = np.asarray(y, dtype=complex)
    n = phi.shape[1]
    frontier = [
        _BlockPath((), (), np.zeros(0, dtype=complex), y, (float(np.linalg.norm(y)),))
    ]

    for _ in range(cfg.k_b):
        expanded: Dict[Tuple[int, ...], _BlockPath] = {}
        failure: Optional[Exception] = None
        for path in frontier:
            excluded = np.zeros(n, dtype=bool)
            for window in path.windows:
                excluded[window] = True
            try:
                starts = block_shortlist(phi, path.residual, cfg.l, excluded, shortlist)
            except InvalidSupportError as exc:
                failure = failure or exc
                continue
            for start in starts:
                key = tuple(sorted(path.starts + (int(start),)))
                if key in expanded:
                    continue
                try:
                    expanded[key] = _extend_path(path, int(start), y, phi, cfg)
                except SingularSupportError as exc:
                    failure = failure or exc
        if not expanded:
            raise failure or InvalidSupportError("no admissible block candidate")
        frontier = sorted(expanded.values(), key=lambda p: (p.residual_norms[-1], p.starts))[:paths]
        logger.debug(
            f"stage 1: best blocks {frontier[0].starts}, residual {frontier[0].residual_norms[-1]:.4g}"
        )

    return [_stage1_result(path, cfg) for path in frontier]


def stage1(y: np.ndarray, phi: np.ndarray, cfg: SystemConfig) -> Stage1Result:
    """Identify the K_b blocks and estimate their values."""
    return stage1_paths(y, phi, cfg)[0]


def stage2(y: np.ndarray, phi: np.ndarray, stage1_result: Stage1Result, cfg: SystemConfig) -> Stage2Result:
    """Cancel the blocks and identify the K_s singles outside blocks and guards."""
    if cfg.k_s == 0:
        empty = np.zeros(0, dtype=complex)
        return Stage2Result(support=np.zeros(0, dtype=int), values=empty, symbols=empty)

    placement = stage1_result.block_placement
    cancelled = residual_update(
        np.asarray(y, dtype=complex),
        phi,
        placement.positions(),
        np.sqrt(cfg.alpha) * stage1_result.block_values,
    )
    excluded = np.ones(phi.shape[1], dtype=bool)
    excluded[available_single_positions(placement, cfg)] = False

    support = mmp(cancelled, phi, cfg.k_s, cfg.l_p, excluded)
    values = least_squares_on_support(phi, support, cancelled) / np.sqrt(1.0 - cfg.alpha)
    _, symbols = demodulate_nearest(values, build_alphabet(cfg.mod_order))
    return Stage2Result(support=support, values=values, symbols=symbols)


def _best_columns(correlations: np.ndarray, count: int) -> np.ndarray:
    order = np.argsort(-correlations, kind="stable")[:count]
    return order[np.isfinite(correlations[order])]


def mmp(
    y: np.ndarray, phi: np.ndarray, k_sparse: int, l_p: int, excluded: IndexSet = ()
) -> np.ndarray:
    """
    Multipath matching pursuit, breadth-first with at most l_p surviving paths.

    Every path is extended by its l_p best-correlated admissible columns; the
    extended supports are deduplicated and the l_p with the smallest
    least-squares residual survive (ties by support order). With l_p = 1 this
    is exactly omp.

    :return: ascending support of size k_sparse
    :raises InvalidSupportError: no admissible column is left
    :raises SingularSupportError: every candidate support is rank deficient
    """
    if l_p < 1:
        raise ValueError(f"l_p must be at least 1, got {l_p}")
    n = phi.shape[1]
    y = np.asarray(y, dtype=complex)
    mask = _exclusion_mask(excluded, n)
    paths: Dict[Tuple[int, ...], np.ndarray] = {(): y}

    for _ in range(k_sparse):
        candidates: Dict[Tuple[int, ...], Tuple[float, np.ndarray]] = {}
        singular = None
        for path, residual in paths.items():
            correlations = column_correlations(phi, residual)
            correlations[mask] = -np.inf
            correlations[list(path)] = -np.inf
            for column in _best_columns(correlations, l_p):
                extended = tuple(sorted(path + (int(column),)))
                if extended in candidates:
                    continue
                try:
                    beta = least_squares_on_support(phi, extended, y)
                except SingularSupportError as exc:
                    singular = exc
                    continue
                candidate_residual = residual_update(y, phi, extended, beta)
                candidates[extended] = (float(np.linalg.norm(candidate_residual)), candidate_residual)
        if not candidates:
            if singular is not None:
                raise singular
            raise InvalidSupportError("no admissible column left for matching pursuit")
        ranked = sorted(candidates.items(), key=lambda item: (item[1][0], item[0]))[:l_p]
        paths = {support: residual for support, (_, residual) in ranked}

    return np.array(next(iter(paths)), dtype=int)


def omp(
    y: np.ndarray,
    phi: np.ndarray,
    k_sparse: int,
    excluded: IndexSet = (),
    return_residuals: bool = False,
):
    """
    Orthogonal matching pursuit.

    :return: ascending support, and the residual norm after every iteration
        (starting with ||y||) when return_residuals is set
    :raises InvalidSupportError: no admissible column is left
    :raises SingularSupportError: the selected columns are rank deficient
    """
    n = phi.shape[1]
    y = np.asarray(y, dtype=complex)
    mask = _exclusion_mask(excluded, n)
    residual = y
    support: Tuple[int, ...] = ()
    residual_norms = [float(np.linalg.norm(y))]

    for _ in range(k_sparse):
        correlations = column_correlations(phi, residual)
        correlations[mask] = -np.inf
        correlations[list(support)] = -np.inf
        best = _best_columns(correlations, 1)
        if best.size == 0:
            raise InvalidSupportError("no admissible column left for matching pursuit")
        support = tuple(sorted(support + (int(best[0]),)))
        beta = least_squares_on_support(phi, support, y)
        residual = residual_update(y, phi, support, beta)
        residual_norms.append(float(np.linalg.norm(residual)))

    result = np.array(support, dtype=int)
    if return_residuals:
        return result, tuple(residual_norms)
    return result


def _slice_on_support(
    y: np.ndarray,
    phi: np.ndarray,
    blocks: BlockPlacement,
    singles: SinglePlacement,
    cfg: SystemConfig,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Joint least squares over blocks and singles, sliced with the alpha scaling of each part."""
    support = np.sort(np.concatenate([blocks.positions(), np.asarray(singles.positions, dtype=int)]))
    beta = least_squares_on_support(phi, support, y)
    estimates = dict(zip(support.tolist(), beta))
    alphabet = build_alphabet(cfg.mod_order)
    block_values = np.array([estimates[p] for p in blocks.positions()], dtype=complex)
    single_values = np.array([estimates[p] for p in singles.positions], dtype=complex)
    _, block_symbols = demodulate_nearest(block_values / np.sqrt(cfg.alpha), alphabet)
    _, single_symbols = demodulate_nearest(single_values / np.sqrt(1.0 - cfg.alpha), alphabet)
    residual_norm = float(np.linalg.norm(residual_update(y, phi, support, beta)))
    return block_symbols, single_symbols, residual_norm


def _decode_two_stage(y: np.ndarray, phi: np.ndarray, cfg: SystemConfig) -> DecodeResult:
    """
    Complete each of the l_p best block sets with stage 2 and keep the
    decodable pattern with the smallest joint residual (first one on ties).
    """
    best: Optional[Tuple[float, DecodeResult]] = None
    failure: Optional[Exception] = None
    for first in stage1_paths(y, phi, cfg, paths=cfg.l_p):
        try:
            second = stage2(y, phi, first, cfg)
            singles = SinglePlacement(positions=tuple(int(p) for p in second.support))
            block_symbols, single_symbols, residual_norm = _slice_on_support(
                y, phi, first.block_placement, singles, cfg
            )
            packet = demap(first.block_placement, singles, block_symbols, single_symbols, cfg)
        except (InvalidSupportError, SingularSupportError) as exc:
            failure = failure or exc
            continue
        if best is None or residual_norm < best[0]:
            best = (
                residual_norm,
                DecodeResult(
                    packet=packet,
                    block_placement=first.block_placement,
                    single_placement=singles,
                    block_symbols=block_symbols,
                    single_symbols=single_symbols,
                    residual_norms=first.residual_norms,
                ),
            )
    if best is None:
        raise failure
    return best[1]


def _decode_full_vector(y: np.ndarray, phi: np.ndarray, cfg: SystemConfig) -> DecodeResult:
    residual_norms: Tuple[float, ...] = ()
    if cfg.decoder == "mmp":
        support = mmp(y, phi, cfg.k_total, cfg.l_p)
    else:
        support, residual_norms = omp(y, phi, cfg.k_total, return_residuals=True)

    blocks, singles = partition_unstructured_support(support, cfg)
    block_symbols, single_symbols, _ = _slice_on_support(y, phi, blocks, singles, cfg)
    packet = demap(blocks, singles, block_symbols, single_symbols, cfg)
    return DecodeResult(
        packet=packet,
        block_placement=blocks,
        single_placement=singles,
        block_symbols=block_symbols,
        single_symbols=single_symbols,
        residual_norms=residual_norms,
    )


def decode(y: np.ndarray, phi: np.ndarray, cfg: SystemConfig) -> DecodeResult:
    """
    Recover a packet from y = Phi s + w with the configured decoder.

    Never raises for a bad support: failures come back as DecodeResult.failure.
    """
    y = np.asarray(y, dtype=complex)
    try:
        if cfg.decoder == "two-stage":
            return _decode_two_stage(y, phi, cfg)
        if cfg.decoder in ("omp", "mmp"):
            return _decode_full_vector(y, phi, cfg)
        raise ValueError(f"Unknown decoder kind {cfg.decoder!r}")
    except InvalidSupportError as exc:
        logger.debug(f"decode failed: invalid support ({exc})")
        return DecodeResult(packet=None, failure=FAILURE_INVALID_SUPPORT, message=str(exc))
    except SingularSupportError as exc:
        logger.debug(f"decode failed: singular support ({exc})")
        return DecodeResult(packet=None, failure=FAILURE_SINGULAR_SUPPORT, message=str(exc))
