"""
Command-line front end of the DM-SVC simulator.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime failure.
"""

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from channel.spreading import (
    ChannelRealization,
    Codebook,
    codebook_for,
    load_codebook,
    measurement_matrix,
    ofdm_equivalence_check,
    save_codebook,
    spread,
)
from coding.params import CONFIG_KEYS, SystemConfig, bit_budget, ensure_valid
from coding.sparse_codec import Packet, encode
from decoding.decoder import decode
from simulation.harness import (
    DEFAULT_SE_CONFIGS,
    SweepResult,
    param_sweep_frame,
    run_alpha_sweep,
    run_bler_sweep,
    run_param_sweep,
    se_table,
)
from utils.errors import ConfigError
from utils.logger import logger
from utils.streams import STREAM_CHECK, derive_stream
from utils.utils import (
    complex_to_dataframe,
    dataframe_to_complex,
    dataframe_to_csv_text,
    load_config,
    load_dataframe,
    measure_time,
    parse_float_list,
    parse_scalar,
    store_dataframe,
)

RUN_KEYS = ("snr_db", "trials", "alphas", "param_grid", "threads", "fresh_codebook")
RUN_DEFAULTS: Dict[str, Any] = {
    "snr_db": [0.0, 2.0, 4.0, 6.0, 8.0],
    "trials": 1000,
    "alphas": [0.2, 0.4, 0.64, 0.8, 0.9],
    "param_grid": [[2, 1], [3, 2]],
    "threads": 1,
    "fresh_codebook": False,
}


# list options whose values may start with a minus sign
SIGNED_LIST_OPTIONS = ("--snr", "--alphas")
SIGNED_VALUE = re.compile(r"-[\d.][\d.,:eE+-]*")


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat TOML configuration file")
    for key in CONFIG_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=f"cfg_{key}", metavar="VALUE")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override any configuration or run key",
    )


def _add_run_arguments(parser: argparse.ArgumentParser, snr_help: str) -> None:
    parser.add_argument("--snr", help=snr_help)
    parser.add_argument("--trials", type=int, help="trials per point")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("--fresh-codebook", action="store_true", default=None, help="new codebook per trial")
    parser.add_argument("--out", type=Path, help="CSV destination (stdout when omitted)")


def attach_signed_values(argv: Sequence[str]) -> List[str]:
    """Rewrite "--snr -2,0" as "--snr=-2,0" so argparse does not take the value for an option."""
    joined: List[str] = []
    index = 0
    while index < len(argv):
        token = argv[index]
        if (
            token in SIGNED_LIST_OPTIONS
            and index + 1 < len(argv)
            and SIGNED_VALUE.fullmatch(argv[index + 1])
        ):
            joined.append(f"{token}={argv[index + 1]}")
            index += 2
            continue
        joined.append(token)
        index += 1
    return joined


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="dmsvc", description="Dual-mapping sparse vector coding simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--log-file", type=Path, help="also write log records to this file")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    simulate = commands.add_parser("simulate", help="BLER against SNR")
    _add_config_arguments(simulate)
    _add_run_arguments(simulate, "SNR list in dB, '0,2,4' or '0:8:2'")

    alpha = commands.add_parser("alpha-sweep", help="BLER against the power allocation ratio")
    _add_config_arguments(alpha)
    _add_run_arguments(alpha, "SNR in dB (first value of a list is used)")
    alpha.add_argument("--alphas", help="alpha list, e.g. '0.2,0.64,0.9'")

    param = commands.add_parser("param-sweep", help="BLER against SNR for several (L, K_s)")
    _add_config_arguments(param)
    _add_run_arguments(param, "SNR list in dB")
    param.add_argument("--params", help="(L, K_s) pairs, e.g. '2:1,3:2'")

    table = commands.add_parser("se-table", help="closed-form spectral efficiency table")
    table.add_argument("--n", type=int, default=138, help="sparse vector length")
    table.add_argument("--c", type=float, default=5.0, help="subcarrier constant C")
    table.add_argument("--configs", help="(K_b, L, K_s) triples, e.g. '1,5,1;1,2,4'")
    table.add_argument("--mod-orders", default="4,16", help="QAM orders, e.g. '4,16'")
    table.add_argument("--out", type=Path, help="CSV destination (stdout when omitted)")

    book = commands.add_parser("codebook", help="export or inspect a spreading codebook")
    _add_config_arguments(book)
    group = book.add_mutually_exclusive_group(required=True)
    group.add_argument("--out", type=Path, help="write the configured codebook here")
    group.add_argument("--inspect", type=Path, help="print the header of a codebook file")

    check = commands.add_parser("check-ofdm", help="verify that F H_T F^H is diagonal")
    check.add_argument("--m", type=int, default=64, help="DFT size (power of two)")
    check.add_argument("--taps", type=int, default=4, help="number of channel taps")
    check.add_argument("--seed", type=int, default=0, help="seed of the random taps")

    enc = commands.add_parser("encode", help="hex packet on stdin -> spread vector CSV")
    _add_config_arguments(enc)
    enc.add_argument("--codebook", type=Path, help="codebook file (generated from the seed otherwise)")
    enc.add_argument("--hex", help="packet as hex instead of stdin")
    enc.add_argument("--out", type=Path, help="CSV destination (stdout when omitted)")

    dec = commands.add_parser("decode", help="received vector CSV -> hex packet")
    _add_config_arguments(dec)
    dec.add_argument("--codebook", type=Path, help="codebook file (generated from the seed otherwise)")
    dec.add_argument("--channel-file", type=Path, help="CSV with h_re,h_im per subcarrier (all ones when omitted)")
    dec.add_argument("--in", dest="received", type=Path, help="received vector CSV (stdin when omitted)")
    return parser


def _split_override(text: str) -> Tuple[str, Any]:
    if "=" not in text:
        raise UsageError(f"override '{text}' is not KEY=VALUE")
    key, value = text.split("=", 1)
    return key.strip(), parse_scalar(value.strip())


def resolve_config(args: argparse.Namespace) -> Tuple[SystemConfig, Dict[str, Any]]:
    """
    Merge the config file, per-key flags and --set overrides, in that order.

    :return: the validated SystemConfig and the run keys
    """
    values: Dict[str, Any] = dict(load_config(args.config)) if args.config else {}
    for key in CONFIG_KEYS:
        raw = getattr(args, f"cfg_{key}", None)
        if raw is not None:
            values[key] = parse_scalar(raw)
    for key in ("trials", "threads", "fresh_codebook"):
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    if getattr(args, "snr", None):
        values["snr_db"] = parse_float_list(args.snr)
    for text in getattr(args, "overrides", []):
        key, value = _split_override(text)
        values[key] = value

    unknown = sorted(set(values) - set(CONFIG_KEYS) - set(RUN_KEYS))
    if unknown:
        raise ConfigError("unknown configuration keys", [f"'{k}'" for k in unknown])
    run = dict(RUN_DEFAULTS)
    run.update({k: v for k, v in values.items() if k in RUN_KEYS})

    cfg = SystemConfig.from_mapping({k: v for k, v in values.items() if k in CONFIG_KEYS})
    return ensure_valid(cfg), run


def _emit(frame: pd.DataFrame, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(dataframe_to_csv_text(frame))
    else:
        store_dataframe(frame, out)


def _emit_sweep(result: SweepResult, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(result.to_csv())
    else:
        result.to_csv(out)


def _as_list(value: Any) -> List[float]:
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        return parse_float_list(value)
    return [float(v) for v in value]


def _codebook(args: argparse.Namespace, cfg: SystemConfig) -> Codebook:
    if getattr(args, "codebook", None) is None:
        return codebook_for(cfg)
    codebook = load_codebook(args.codebook)
    if (codebook.m, codebook.n, codebook.k_total) != (cfg.m, cfg.n, cfg.k_total):
        raise ConfigError(
            "codebook does not match the configuration",
            [f"codebook {codebook.m}x{codebook.n} k_total={codebook.k_total}, "
             f"config {cfg.m}x{cfg.n} k_total={cfg.k_total}"],
        )
    return codebook


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg, run = resolve_config(args)
    result, elapsed = measure_time(
        run_bler_sweep,
        cfg,
        _as_list(run["snr_db"]),
        int(run["trials"]),
        threads=int(run["threads"]),
        fresh_codebook=bool(run["fresh_codebook"]),
    )
    logger.info(f"Simulation finished in {elapsed:.1f} s")
    _emit_sweep(result, args.out)
    return 0


def cmd_alpha_sweep(args: argparse.Namespace) -> int:
    cfg, run = resolve_config(args)
    alphas = parse_float_list(args.alphas) if args.alphas else _as_list(run["alphas"])
    result, elapsed = measure_time(
        run_alpha_sweep,
        cfg,
        alphas,
        _as_list(run["snr_db"])[0],
        int(run["trials"]),
        threads=int(run["threads"]),
        fresh_codebook=bool(run["fresh_codebook"]),
    )
    logger.info(f"Alpha sweep finished in {elapsed:.1f} s, best alpha {result.best().value}")
    _emit_sweep(result, args.out)
    return 0


def _parse_pairs(text: str) -> List[Tuple[int, int]]:
    pairs = []
    for item in text.split(","):
        l, k_s = item.split(":")
        pairs.append((int(l), int(k_s)))
    return pairs


def cmd_param_sweep(args: argparse.Namespace) -> int:
    cfg, run = resolve_config(args)
    params = _parse_pairs(args.params) if args.params else [tuple(p) for p in run["param_grid"]]
    results, elapsed = measure_time(
        run_param_sweep,
        cfg,
        params,
        _as_list(run["snr_db"]),
        int(run["trials"]),
        threads=int(run["threads"]),
        fresh_codebook=bool(run["fresh_codebook"]),
    )
    logger.info(f"Parameter sweep finished in {elapsed:.1f} s")
    _emit(param_sweep_frame(results), args.out)
    return 0


def cmd_se_table(args: argparse.Namespace) -> int:
    configs = DEFAULT_SE_CONFIGS
    if args.configs:
        configs = [tuple(int(v) for v in item.split(",")) for item in args.configs.split(";")]
    mod_orders = [int(v) for v in args.mod_orders.split(",")]
    _emit(se_table(args.n, args.c, configs, mod_orders), args.out)
    return 0


def cmd_codebook(args: argparse.Namespace) -> int:
    if args.inspect:
        codebook = load_codebook(args.inspect)
        sys.stdout.write(
            f"M={codebook.m} N={codebook.n} k_total={codebook.k_total} seed={codebook.seed}\n"
        )
        return 0
    cfg, _ = resolve_config(args)
    save_codebook(codebook_for(cfg), args.out)
    return 0


def cmd_check_ofdm(args: argparse.Namespace) -> int:
    error = ofdm_equivalence_check(args.m, derive_stream(args.seed, STREAM_CHECK), n_taps=args.taps)
    sys.stdout.write(f"{error:.3e}\n")
    logger.info(f"max off-diagonal magnitude of F H_T F^H for M={args.m}: {error:.3e}")
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    cfg, _ = resolve_config(args)
    text = args.hex if args.hex is not None else sys.stdin.read()
    try:
        packet = Packet.from_hex(text, bit_budget(cfg).b_total)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    x = spread(_codebook(args, cfg), encode(packet, cfg))
    _emit(complex_to_dataframe(x), args.out)
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    cfg, _ = resolve_config(args)
    received = load_dataframe(args.received) if args.received else pd.read_csv(sys.stdin)
    y = dataframe_to_complex(received)
    h_diag = np.ones(cfg.m, dtype=complex)
    if args.channel_file:
        h_diag = dataframe_to_complex(load_dataframe(args.channel_file), prefix="h_")
    if y.size != cfg.m or h_diag.size != cfg.m:
        raise ValueError(f"expected {cfg.m} subcarriers, got y={y.size} and h={h_diag.size}")

    channel = ChannelRealization(h_diag=h_diag, noise_sigma2=0.0)
    result = decode(y, measurement_matrix(_codebook(args, cfg), channel), cfg)
    if not result.ok:
        logger.error(f"decoding failed: {result.failure} ({result.message})")
        return 3
    sys.stdout.write(result.packet.to_hex() + "\n")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "alpha-sweep": cmd_alpha_sweep,
    "param-sweep": cmd_param_sweep,
    "se-table": cmd_se_table,
    "codebook": cmd_codebook,
    "check-ofdm": cmd_check_ofdm,
    "encode": cmd_encode,
    "decode": cmd_decode,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(attach_signed_values(sys.argv[1:] if argv is None else argv))
    except UsageError as exc:
        sys.stderr.write(f"{parser.format_usage()}{exc}\n")
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.verbose:
        logger.set_verbosity(logging.DEBUG)
    if args.log_file:
        logger.add_file(args.log_file)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        logger.error(str(exc))
        return 1
    except ConfigError as exc:
        for violation in exc.violations or [str(exc)]:
            logger.error(f"configuration: {violation}")
        return 2
    except Exception as exc:
        logger.exception(f"{args.command} failed: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
