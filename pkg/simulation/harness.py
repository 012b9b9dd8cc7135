"""
Seeded Monte Carlo BLER experiments.

Every trial draws its packet, channel and noise from its own named sub-stream
of the master seed (see utils.streams), so the counts of a sweep are the same
for any number of worker threads and any execution order.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.stats
from tqdm import tqdm

from channel.spreading import (
    Codebook,
    codebook_for,
    measurement_matrix,
    realize_channel,
    spread,
    transmit,
)
from coding.params import (
    SystemConfig,
    bit_budget,
    ensure_valid,
    operating_spectral_efficiency,
    spectral_efficiency,
    subcarrier_requirements,
    ssc_index_bits,
)
from coding.sparse_codec import Packet, encode
from decoding.decoder import FAILURE_INVALID_SUPPORT, FAILURE_SINGULAR_SUPPORT, decode
from utils.logger import logger
from utils.streams import STREAM_CHANNEL, STREAM_NOISE, STREAM_PACKET, derive_stream
from utils.utils import dataframe_to_csv_text, store_dataframe

FAILURE_WRONG_BITS = "wrong_bits"

CSV_COLUMNS = [
    "axis",
    "value",
    "snr_db",
    "trials",
    "errors",
    "bler",
    "ci_low",
    "ci_high",
    "failure_invalid_support",
    "failure_singular",
]

# Block sparsity patterns with six non-zero entries, as (K_b, L, K_s)
DEFAULT_SE_CONFIGS = ((1, 2, 4), (1, 3, 3), (1, 4, 2), (1, 5, 1), (2, 2, 2))


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    snr_db: float
    packet_ok: bool
    failure: Optional[str] = None


@dataclass
class SweepPoint:
    """Aggregated outcomes of all trials at one axis value."""

    axis: str
    value: object
    snr_db: float
    trials: int = 0
    errors: int = 0
    failure_invalid_support: int = 0
    failure_singular: int = 0
    failure_wrong_bits: int = 0

    def add(self, outcome: TrialOutcome) -> None:
        self.trials += 1
        if outcome.packet_ok:
            return
        self.errors += 1
        if outcome.failure == FAILURE_INVALID_SUPPORT:
            self.failure_invalid_support += 1
        elif outcome.failure == FAILURE_SINGULAR_SUPPORT:
            self.failure_singular += 1
        else:
            self.failure_wrong_bits += 1

    @property
    def bler(self) -> float:
        return self.errors / self.trials if self.trials else math.nan

    @property
    def interval(self) -> Tuple[float, float]:
        return wilson_interval(self.errors, self.trials)

    def as_row(self) -> Dict[str, object]:
        ci_low, ci_high = self.interval
        return {
            "axis": self.axis,
            "value": self.value,
            "snr_db": self.snr_db,
            "trials": self.trials,
            "errors": self.errors,
            "bler": self.bler,
            "ci_low": ci_low,
            "ci_high": ci_high,
            "failure_invalid_support": self.failure_invalid_support,
            "failure_singular": self.failure_singular,
        }


@dataclass
class SweepResult:
    points: List[SweepPoint] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([p.as_row() for p in self.points], columns=CSV_COLUMNS)

    def to_csv(self, file_path: Optional[Union[str, Path]] = None) -> Union[str, Path]:
        """CSV text of the sweep, or the written path when ``file_path`` is given."""
        frame = self.to_frame()
        if file_path is None:
            return dataframe_to_csv_text(frame)
        return store_dataframe(frame, file_path)

    def best(self) -> SweepPoint:
        """The point with the lowest BLER (first one on ties)."""
        if not self.points:
            raise ValueError("empty sweep")
        return min(self.points, key=lambda p: p.bler)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, index: int) -> SweepPoint:
        return self.points[index]


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    z = scipy.stats.norm.ppf(0.5 + confidence / 2.0)
    p = errors / trials
    denominator = 1.0 + z * z / trials
    centre = (p + z * z / (2.0 * trials)) / denominator
    half_width = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denominator
    # the closed form cancels inexactly at the edges
    low = 0.0 if errors == 0 else max(0.0, centre - half_width)
    high = 1.0 if errors == trials else min(1.0, centre + half_width)
    return low, high


def run_trial(
    cfg: SystemConfig,
    codebook: Optional[Codebook],
    snr_db: float,
    master_seed: int,
    point: int,
    trial: int,
) -> TrialOutcome:
    """
    One encode -> spread -> channel -> decode round.

    ``codebook`` None draws a fresh codebook from the (point, trial) sub-stream.
    """
    if codebook is None:
        codebook = codebook_for(cfg.replace(seed=master_seed), point, trial)
    packet = Packet.random(derive_stream(master_seed, STREAM_PACKET, point, trial), cfg)
    channel = realize_channel(cfg, snr_db, derive_stream(master_seed, STREAM_CHANNEL, point, trial))
    x = spread(codebook, encode(packet, cfg))
    y = transmit(x, channel, derive_stream(master_seed, STREAM_NOISE, point, trial))

    result = decode(y, measurement_matrix(codebook, channel), cfg)
    if result.ok and result.packet == packet:
        return TrialOutcome(trial=trial, snr_db=snr_db, packet_ok=True)
    failure = result.failure or FAILURE_WRONG_BITS
    logger.debug(f"trial {trial} at {snr_db} dB failed: {failure} {result.message}")
    return TrialOutcome(trial=trial, snr_db=snr_db, packet_ok=False, failure=failure)


def _run_point(
    cfg: SystemConfig,
    codebook: Optional[Codebook],
    snr_db: float,
    trials: int,
    master_seed: int,
    point: int,
    threads: int,
    progress: tqdm,
) -> Iterable[TrialOutcome]:
    def one(trial: int) -> TrialOutcome:
        return run_trial(cfg, codebook, snr_db, master_seed, point, trial)

    if threads <= 1:
        for trial in range(trials):
            yield one(trial)
            progress.update(1)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for outcome in pool.map(one, range(trials), chunksize=max(1, trials // (8 * threads))):
            yield outcome
            progress.update(1)


def _sweep(
    configs: Sequence[Tuple[SystemConfig, float, object]],
    axis: str,
    trials: int,
    master_seed: int,
    threads: int,
    fresh_codebook: bool,
    point_offset: int = 0,
    codebook: Optional[Codebook] = None,
) -> SweepResult:
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    for cfg, _, _ in configs:
        ensure_valid(cfg)

    result = SweepResult()
    with tqdm(total=trials * len(configs), desc=f"{axis} sweep", disable=None) as progress:
        for index, (cfg, snr_db, value) in enumerate(configs):
            point_codebook = None
            if not fresh_codebook:
                point_codebook = codebook or codebook_for(cfg.replace(seed=master_seed))
            point = SweepPoint(axis=axis, value=value, snr_db=float(snr_db))
            for outcome in _run_point(
                cfg, point_codebook, snr_db, trials, master_seed, point_offset + index, threads, progress
            ):
                point.add(outcome)
            low, high = point.interval
            logger.info(
                f"{axis}={value} snr={snr_db} dB: {point.errors}/{point.trials} errors, "
                f"BLER {point.bler:.3e} [{low:.3e}, {high:.3e}]"
            )
            result.points.append(point)
    return result


def run_bler_sweep(
    cfg: SystemConfig,
    snr_list: Sequence[float],
    trials_per_point: int,
    master_seed: Optional[int] = None,
    threads: int = 1,
    fresh_codebook: bool = False,
) -> SweepResult:
    """BLER against SNR for one configuration; one codebook for the whole run."""
    ensure_valid(cfg)
    master_seed = cfg.seed if master_seed is None else master_seed
    budget = bit_budget(cfg)
    logger.info(
        f"BLER sweep: N={cfg.n} M={cfg.m} K_b={cfg.k_b} L={cfg.l} K_s={cfg.k_s} "
        f"{cfg.mod_order}-QAM alpha={cfg.alpha} {cfg.channel} {cfg.decoder}, b={budget.b_total}, "
        f"SE={operating_spectral_efficiency(cfg):.4g} bit/subcarrier"
    )
    codebook = None if fresh_codebook else codebook_for(cfg.replace(seed=master_seed))
    configs = [(cfg, float(snr), float(snr)) for snr in snr_list]
    return _sweep(configs, "snr", trials_per_point, master_seed, threads, fresh_codebook, codebook=codebook)


def run_alpha_sweep(
    cfg: SystemConfig,
    alpha_list: Sequence[float],
    snr_db: float,
    trials: int,
    master_seed: Optional[int] = None,
    threads: int = 1,
    fresh_codebook: bool = False,
) -> SweepResult:
    """BLER against the power allocation ratio at a fixed SNR."""
    master_seed = cfg.seed if master_seed is None else master_seed
    configs = [(cfg.replace(alpha=float(a)), float(snr_db), float(a)) for a in alpha_list]
    for derived, _, _ in configs:
        ensure_valid(derived)
    codebook = None if fresh_codebook else codebook_for(cfg.replace(seed=master_seed))
    result = _sweep(configs, "alpha", trials, master_seed, threads, fresh_codebook, codebook=codebook)
    best = result.best()
    logger.info(f"lowest BLER {best.bler:.3e} at alpha={best.value}")
    return result


def run_param_sweep(
    cfg: SystemConfig,
    params: Sequence[Tuple[int, int]],
    snr_list: Sequence[float],
    trials: int,
    master_seed: Optional[int] = None,
    threads: int = 1,
    fresh_codebook: bool = False,
) -> Dict[Tuple[int, int], SweepResult]:
    """
    One BLER-vs-SNR sweep per (L, K_s). Each pair gets its own codebook since
    K_bL + K_s changes the codebook scaling.
    """
    master_seed = cfg.seed if master_seed is None else master_seed
    derived = {(int(l), int(k_s)): cfg.replace(l=int(l), k_s=int(k_s)) for l, k_s in params}
    for pair_cfg in derived.values():
        ensure_valid(pair_cfg)

    results: Dict[Tuple[int, int], SweepResult] = {}
    for index, (pair, pair_cfg) in enumerate(derived.items()):
        logger.info(f"L={pair[0]} K_s={pair[1]}: b={bit_budget(pair_cfg).b_total} bits")
        configs = [(pair_cfg, float(snr), f"({pair[0]},{pair[1]})") for snr in snr_list]
        results[pair] = _sweep(
            configs,
            "(L,K_s)",
            trials,
            master_seed,
            threads,
            fresh_codebook,
            point_offset=index * len(configs),
        )
    return results


def param_sweep_frame(results: Dict[Tuple[int, int], SweepResult]) -> pd.DataFrame:
    frames = [result.to_frame() for result in results.values()]
    if not frames:
        return pd.DataFrame(columns=CSV_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def se_table(
    n: int,
    c_const: float,
    configs: Sequence[Tuple[int, int, int]] = DEFAULT_SE_CONFIGS,
    mod_orders: Sequence[int] = (4, 16),
) -> pd.DataFrame:
    """
    Closed-form SE of DM-SVC and SSC for each (K_b, L, K_s) and modulation order.
    """
    rows = []
    for mod_order in mod_orders:
        for k_b, l, k_s in configs:
            cfg = SystemConfig(n=n, m=k_b * l + k_s, k_b=k_b, l=l, k_s=k_s, mod_order=mod_order)
            ensure_valid(cfg, simulation=False)
            budget = bit_budget(cfg)
            m_svc, m_dmsvc = subcarrier_requirements(cfg, c_const)
            se_dmsvc, se_ssc = spectral_efficiency(cfg, c_const)
            rows.append(
                {
                    "k_b": k_b,
                    "l": l,
                    "k_s": k_s,
                    "mod_order": mod_order,
                    "b_dmsvc": budget.b_total,
                    "m_dmsvc": m_dmsvc,
                    "se_dmsvc": se_dmsvc,
                    "b_ssc": ssc_index_bits(cfg) + budget.b_s,
                    "m_ssc": m_svc,
                    "se_ssc": se_ssc,
                    "ratio": se_dmsvc / se_ssc,
                }
            )
    return pd.DataFrame(rows)
