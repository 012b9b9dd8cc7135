"""
Scheme parameters and the closed-form quantities derived from them.

Bit budgets use exact integer binomials (``math.comb``) so that
``floor(log2(.))`` never suffers from rounding near powers of two.
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Tuple

from utils.errors import ConfigError

SUPPORTED_MOD_ORDERS = (4, 16, 64)
CHANNEL_KINDS = ("awgn", "rayleigh-iid")
DECODER_KINDS = ("two-stage", "omp", "mmp")

CONFIG_KEYS = (
    "n",
    "m",
    "k_b",
    "l",
    "k_s",
    "mod_order",
    "alpha",
    "channel",
    "decoder",
    "l_p",
    "seed",
)


@dataclass(frozen=True)
class SystemConfig:
    """
    All parameters of one DM-SVC configuration.

    n: sparse vector length N
    m: number of subcarriers M (length of a spreading sequence)
    k_b: number of non-zero blocks K_b
    l: block length L
    k_s: number of single non-zero elements K_s
    mod_order: QAM alphabet size (4, 16 or 64)
    alpha: share of the transmit power given to the blocks, 0 < alpha < 1
    channel: "awgn" or "rayleigh-iid"
    decoder: "two-stage", "omp" or "mmp"
    l_p: path budget of the multipath matching pursuit
    seed: 64-bit unsigned master seed
    """

    n: int
    m: int
    k_b: int = 1
    l: int = 1
    k_s: int = 0
    mod_order: int = 4
    alpha: float = 0.64
    channel: str = "awgn"
    decoder: str = "two-stage"
    l_p: int = 4
    seed: int = 0

    @property
    def k_total(self) -> int:
        """Number of non-zero entries K_b*L + K_s."""
        return self.k_b * self.l + self.k_s

    @property
    def num_blocks(self) -> int:
        """B = N / L, the number of L-wide column groups of the codebook."""
        return self.n // self.l

    @property
    def bits_per_symbol(self) -> int:
        return int(self.mod_order).bit_length() - 1

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "SystemConfig":
        """
        Build a config from a flat key/value mapping (config file or overrides).

        Unknown keys and values of the wrong type raise ConfigError. The result
        is not validated; call validate() for the invariants.
        """
        unknown = sorted(set(values) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError("unknown configuration keys", [f"'{k}'" for k in unknown])
        missing = [k for k in ("n", "m") if k not in values]
        if missing:
            raise ConfigError("missing configuration keys", [f"'{k}'" for k in missing])

        kwargs: Dict[str, Any] = {}
        problems = []
        for field in dataclasses.fields(cls):
            if field.name not in values:
                continue
            raw = values[field.name]
            try:
                kwargs[field.name] = _coerce(field.name, raw)
            except (TypeError, ValueError):
                problems.append(f"'{field.name}' has invalid value {raw!r}")
        if problems:
            raise ConfigError("invalid configuration values", problems)
        return cls(**kwargs)


def _coerce(name: str, raw: Any) -> Any:
    if name in ("channel", "decoder"):
        if not isinstance(raw, str):
            raise TypeError(name)
        return raw
    if name == "alpha":
        if isinstance(raw, bool):
            raise TypeError(name)
        return float(raw)
    if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
        raise TypeError(name)
    return int(raw)


@dataclass(frozen=True)
class BitBudget:
    """Bits carried by the block indexes, single indexes and QAM symbols."""

    b_i1: int
    b_i2: int
    b_s: int

    @property
    def b_total(self) -> int:
        return self.b_i1 + self.b_i2 + self.b_s


def validate(cfg: SystemConfig, simulation: bool = True) -> List[str]:
    """
    Collect every violated invariant of a configuration.

    :param cfg: the configuration to check
    :param simulation: also check the invariants only the encoder/decoder chain
        needs (N divisible by L, M large enough for the least-squares fits).
        Closed-form evaluations (SE tables) pass False.
    :return: violation descriptions, empty iff the configuration is valid
    """
    violations = []
    if cfg.k_b < 1:
        violations.append(f"K_b < 1 (K_b={cfg.k_b})")
    if cfg.k_s < 0:
        violations.append(f"K_s < 0 (K_s={cfg.k_s})")
    if cfg.l < 1:
        violations.append(f"L < 1 (L={cfg.l})")
    if not 0.0 < cfg.alpha < 1.0:
        violations.append(f"alpha outside (0, 1) (alpha={cfg.alpha})")
    if cfg.mod_order not in SUPPORTED_MOD_ORDERS:
        violations.append(f"mod_order not in {SUPPORTED_MOD_ORDERS} (mod_order={cfg.mod_order})")
    if cfg.channel not in CHANNEL_KINDS:
        violations.append(f"channel not in {CHANNEL_KINDS} (channel={cfg.channel!r})")
    if cfg.decoder not in DECODER_KINDS:
        violations.append(f"decoder not in {DECODER_KINDS} (decoder={cfg.decoder!r})")
    if cfg.l_p < 1:
        violations.append(f"L_p < 1 (L_p={cfg.l_p})")
    if not 0 <= cfg.seed < 2**64:
        violations.append(f"seed is not a 64-bit unsigned integer (seed={cfg.seed})")

    required = cfg.k_b * cfg.l + 2 * cfg.k_b + cfg.k_s
    if cfg.n < required:
        violations.append(
            f"N < K_bL + 2K_b + K_s (N={cfg.n}, K_bL + 2K_b + K_s={required})"
        )
    if simulation:
        if cfg.l >= 1 and cfg.n % cfg.l != 0:
            violations.append(f"N mod L != 0 (N={cfg.n}, L={cfg.l})")
        if cfg.m < cfg.k_total:
            violations.append(f"M < K_bL + K_s (M={cfg.m}, K_bL + K_s={cfg.k_total})")
    return violations


def ensure_valid(cfg: SystemConfig, simulation: bool = True) -> SystemConfig:
    """Return cfg unchanged or raise ConfigError listing every violation."""
    violations = validate(cfg, simulation=simulation)
    if violations:
        raise ConfigError("invalid configuration", violations)
    return cfg


def floor_log2(value: int) -> int:
    """floor(log2(value)) for a positive integer, computed exactly."""
    if value < 1:
        raise ValueError(f"floor_log2 needs a positive integer, got {value}")
    return int(value).bit_length() - 1


def block_placement_count(cfg: SystemConfig) -> int:
    """C(N - K_b(L-1), K_b): number of non-overlapping block placements."""
    return math.comb(cfg.n - cfg.k_b * (cfg.l - 1), cfg.k_b)


def single_placement_capacity(cfg: SystemConfig) -> int:
    """C(N - K_bL - 2K_b, K_s): guaranteed number of single placements."""
    return math.comb(cfg.n - cfg.k_b * cfg.l - 2 * cfg.k_b, cfg.k_s)


def bit_budget(cfg: SystemConfig) -> BitBudget:
    """
    Bits mapped onto block indexes, single indexes and QAM symbols.

    Python integers are arbitrary precision, so the binomials never overflow.
    """
    b_i1 = floor_log2(block_placement_count(cfg))
    b_i2 = floor_log2(single_placement_capacity(cfg)) if cfg.k_s > 0 else 0
    b_s = cfg.k_total * cfg.bits_per_symbol
    return BitBudget(b_i1=b_i1, b_i2=b_i2, b_s=b_s)


def subcarrier_requirements(cfg: SystemConfig, c_const: float) -> Tuple[float, float]:
    """
    Subcarriers needed by plain SVC/SSC and by DM-SVC (natural logarithm).

    :return: (m_svc, m_dmsvc)
    """
    if c_const <= 0:
        raise ValueError(f"c_const must be positive, got {c_const}")
    log_term = math.log(cfg.n / cfg.k_total)
    m_svc = c_const * cfg.k_total * log_term
    m_dmsvc = c_const * (cfg.k_b + cfg.k_s) * log_term
    return m_svc, m_dmsvc


def ssc_index_bits(cfg: SystemConfig) -> int:
    """Bits on the unstructured support of an SSC vector with the same sparsity."""
    return floor_log2(math.comb(cfg.n, cfg.k_total))


def spectral_efficiency(cfg: SystemConfig, c_const: float) -> Tuple[float, float]:
    """
    Bits per subcarrier of DM-SVC and of SSC at their required subcarrier counts.

    A zero subcarrier requirement (K_bL + K_s = N) yields infinite SE.

    :return: (se_dmsvc, se_ssc)
    """
    budget = bit_budget(cfg)
    m_svc, m_dmsvc = subcarrier_requirements(cfg, c_const)
    b_ssc = ssc_index_bits(cfg) + budget.b_s
    se_dmsvc = budget.b_total / m_dmsvc if m_dmsvc > 0 else math.inf
    se_ssc = b_ssc / m_svc if m_svc > 0 else math.inf
    return se_dmsvc, se_ssc


def operating_spectral_efficiency(cfg: SystemConfig) -> float:
    """b / M: bits per subcarrier actually used by a simulated configuration."""
    return bit_budget(cfg).b_total / cfg.m
