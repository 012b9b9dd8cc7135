"""
Spreading codebook, frequency-domain channel and noise.

The simulation runs per subcarrier: with a cyclic prefix longer than the
channel, F H_T F^H is diagonal, so y = H_F G s + w. ofdm_equivalence_check
verifies that identity numerically instead of simulating the OFDM chain.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.linalg

from coding.params import SystemConfig
from coding.sparse_codec import SparseVector
from utils.logger import logger
from utils.streams import STREAM_CODEBOOK, derive_stream

CODEBOOK_MAGIC = b"DMSVCCB1"


@dataclass(frozen=True, eq=False)
class Codebook:
    """M x N spreading matrix with entries +-1/sqrt(k_total)."""

    matrix: np.ndarray = field(repr=False)
    seed: int
    k_total: int

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Diagonal of H_F and the per-complex-sample noise variance."""

    h_diag: np.ndarray = field(repr=False)
    noise_sigma2: float


def generate_codebook(seed: int, m: int, n: int, k_total: int, *indices: int) -> Codebook:
    """
    Draw an i.i.d. equiprobable +-1 codebook scaled by 1/sqrt(k_total).

    Signs come from the codebook sub-stream (Philox) of ``seed``; they are
    drawn column after column (column-major fill). ``indices`` select a
    further sub-stream, used for per-trial codebooks.
    """
    if min(m, n, k_total) < 1:
        raise ValueError(f"m, n and k_total must be positive (m={m}, n={n}, k_total={k_total})")
    rng = derive_stream(seed, STREAM_CODEBOOK, *indices)
    negative = rng.integers(0, 2, size=(n, m), dtype=np.uint8).T
    matrix = (1.0 - 2.0 * negative) / np.sqrt(k_total)
    matrix.setflags(write=False)
    return Codebook(matrix=matrix, seed=int(seed), k_total=int(k_total))


def codebook_for(cfg: SystemConfig, *indices: int) -> Codebook:
    return generate_codebook(cfg.seed, cfg.m, cfg.n, cfg.k_total, *indices)


def save_codebook(codebook: Codebook, file_path: Union[str, Path]) -> Path:
    """
    Store a codebook: magic, little-endian u64 (M, N, k_total, seed), packed sign bits row-major.
    """
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([codebook.m, codebook.n, codebook.k_total, codebook.seed], dtype="<u8")
    signs = np.packbits((codebook.matrix < 0).astype(np.uint8).ravel(order="C"))
    path.write_bytes(CODEBOOK_MAGIC + header.tobytes() + signs.tobytes())
    logger.info(f"Stored codebook {codebook.m}x{codebook.n} as {path}")
    return path


def load_codebook(file_path: Union[str, Path]) -> Codebook:
    """Read a codebook written by save_codebook."""
    payload = Path(file_path).read_bytes()
    if payload[: len(CODEBOOK_MAGIC)] != CODEBOOK_MAGIC:
        raise ValueError(f"{file_path} is not a codebook file (bad magic)")
    offset = len(CODEBOOK_MAGIC)
    m, n, k_total, seed = (int(v) for v in np.frombuffer(payload, dtype="<u8", count=4, offset=offset))
    signs = np.unpackbits(np.frombuffer(payload, dtype=np.uint8, offset=offset + 32))
    if signs.size < m * n:
        raise ValueError(f"{file_path} is truncated: {signs.size} sign bits for a {m}x{n} codebook")
    negative = signs[: m * n].reshape(m, n)
    matrix = (1.0 - 2.0 * negative) / np.sqrt(k_total)
    matrix.setflags(write=False)
    return Codebook(matrix=matrix, seed=seed, k_total=k_total)


def spread(codebook: Codebook, s: Union[SparseVector, np.ndarray]) -> np.ndarray:
    """x = G s, summing only the non-zero columns."""
    values = s.values if isinstance(s, SparseVector) else np.asarray(s, dtype=complex)
    if values.shape != (codebook.n,):
        raise ValueError(f"sparse vector has shape {values.shape}, codebook expects ({codebook.n},)")
    support = np.flatnonzero(values)
    return codebook.matrix[:, support] @ values[support]


def transmit_energy(cfg: SystemConfig) -> float:
    """Average energy per subcarrier of x: (alpha K_bL + (1-alpha) K_s) / (K_bL + K_s)."""
    return (cfg.alpha * cfg.k_b * cfg.l + (1.0 - cfg.alpha) * cfg.k_s) / cfg.k_total


def realize_channel(
    cfg: SystemConfig, snr_db: float, rng: Optional[np.random.Generator] = None
) -> ChannelRealization:
    """
    Draw H_F for the configured channel kind and set sigma^2 from the SNR.

    AWGN needs no randomness; ``rng`` is only read for rayleigh-iid.
    """
    if cfg.channel == "awgn":
        h_diag = np.ones(cfg.m, dtype=complex)
    elif cfg.channel == "rayleigh-iid":
        if rng is None:
            raise ValueError("a rayleigh-iid channel needs a random stream")
        h_diag = (rng.standard_normal(cfg.m) + 1j * rng.standard_normal(cfg.m)) / np.sqrt(2.0)
    else:
        raise ValueError(f"Unknown channel kind {cfg.channel!r}")
    noise_sigma2 = transmit_energy(cfg) / 10.0 ** (snr_db / 10.0)
    return ChannelRealization(h_diag=h_diag, noise_sigma2=float(noise_sigma2))


def measurement_matrix(codebook: Codebook, channel: ChannelRealization) -> np.ndarray:
    """Phi = H_F G, the matrix seen by a receiver with perfect channel knowledge."""
    return channel.h_diag[:, None] * codebook.matrix


def transmit(
    x: np.ndarray, channel: ChannelRealization, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """y = H_F x + w with w ~ CN(0, sigma^2 I)."""
    x = np.asarray(x, dtype=complex)
    if x.shape != channel.h_diag.shape:
        raise ValueError(f"x has shape {x.shape}, channel has {channel.h_diag.shape}")
    y = channel.h_diag * x
    if channel.noise_sigma2 > 0:
        if rng is None:
            raise ValueError("a noisy channel needs a random stream")
        scale = np.sqrt(channel.noise_sigma2 / 2.0)
        y = y + scale * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
    return y


def diagonalize_circulant(taps: np.ndarray) -> np.ndarray:
    """F H_T F^H for the circulant H_T whose first column is ``taps``."""
    taps = np.asarray(taps, dtype=complex)
    dft = scipy.linalg.dft(taps.size, scale="sqrtn")
    return dft @ scipy.linalg.circulant(taps) @ dft.conj().T


def ofdm_equivalence_check(
    m: int, rng: Optional[np.random.Generator] = None, n_taps: int = 4, taps: Optional[np.ndarray] = None
) -> float:
    """
    Largest off-diagonal magnitude of F H_T F^H for a random multipath channel.

    :param m: DFT size, a power of two
    :param rng: stream for the random taps (unused when ``taps`` is given)
    :param n_taps: number of random taps, smaller than m
    :param taps: explicit first column of H_T, zero-padded to m
    """
    if m < 1 or m & (m - 1):
        raise ValueError(f"m must be a power of two, got {m}")
    if taps is None:
        if not 1 <= n_taps < m:
            raise ValueError(f"n_taps must lie in [1, {m}), got {n_taps}")
        if rng is None:
            raise ValueError("random taps need a random stream")
        taps = (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)) / np.sqrt(2.0 * n_taps)
    column = np.zeros(m, dtype=complex)
    column[: len(taps)] = taps
    diagonalized = diagonalize_circulant(column)
    off_diagonal = diagonalized - np.diag(np.diag(diagonalized))
    error = float(np.max(np.abs(off_diagonal)))
    logger.debug(f"OFDM diagonal check: m={m}, max off-diagonal {error:.3e}")
    return error
