"""Command-line entry point.

Heavy imports happen after argument parsing so that --threads can cap the
BLAS pools through the environment before numpy loads.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cfura",
        description="Unsourced random access over a cell-free network: "
        "multisource AMP decoding experiments.",
    )
    p.add_argument("--config", help="TOML scenario file (keys mirror the config fields)")
    p.add_argument("--preset", choices=("desk", "paper"), help="baseline parameter set")
    p.add_argument("--seed", type=int, help="master RNG seed (overrides config)")
    p.add_argument("--out-dir", default="out", help="artifact directory (default: ./out)")
    p.add_argument("--threads", type=int, default=0, help="cap BLAS threads (0 = library default)")
    p.add_argument(
        "--deterministic",
        action="store_true",
        help="bit-reproducible mode: single-threaded BLAS, fixed reduction order",
    )
    p.add_argument("--runs", type=int, help="Monte Carlo runs (overrides config)")
    p.add_argument("-v", "--verbose", action="store_true")

    sub = p.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("se-compare", help="normalized MSE vs iteration, AMP against state evolution")
    sc.add_argument("--variants", default="lb-matched,lb-mismatched,sc")

    roc = sub.add_parser("roc", help="missed-detection / false-alarm tradeoff sweep")
    roc.add_argument("--variants", default="lb-matched,lb-mismatched,sc")

    pc = sub.add_parser("position-cdf", help="position-error CDFs over detected messages")
    pc.add_argument("--variants", default="lb-matched,sc")

    ps = sub.add_parser("position-snapshot", help="per-grid objective heat map data for one message")
    ps.add_argument("--location", type=int, default=None)
    ps.add_argument("--message", type=int, default=None)

    cm = sub.add_parser("channel-mse", help="channel estimation MSE vs receive SNR")
    cm.add_argument("--snr-list", default="0,5,10")
    cm.add_argument("--variants", default="lb-matched")

    sub.add_parser("validate-config", help="parse, validate and print the resolved config")
    return p


def _load_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _resolve_config(args):
    from .scenario import PRESETS, ScenarioConfig

    merged = {}
    if args.preset:
        merged.update(PRESETS[args.preset])
    if args.config:
        merged.update(_load_toml(args.config))
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.runs is not None:
        merged["runs"] = args.runs
    return ScenarioConfig.from_dict(merged)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    threads = 1 if args.deterministic else args.threads
    if threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    from .denoiser import NumericalError
    from .scenario import ConfigError

    try:
        cfg = _resolve_config(args)
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    execution = {
        "command": args.command,
        "threads": threads,
        "deterministic": bool(args.deterministic),
        "preset": args.preset,
    }

    try:
        return _dispatch(args, cfg, execution)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


def _dispatch(args, cfg, execution) -> int:
    from . import experiments

    out_dir = args.out_dir
    if args.command == "validate-config":
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return 0
    if args.command == "se-compare":
        res = experiments.run_se_comparison(
            cfg, out_dir, variants=tuple(args.variants.split(",")), execution=execution
        )
    elif args.command == "roc":
        res = experiments.run_roc(
            cfg, out_dir, variants=tuple(args.variants.split(",")), execution=execution
        )
    elif args.command == "position-cdf":
        res = experiments.run_position_cdf(
            cfg, out_dir, variants=tuple(args.variants.split(",")), execution=execution
        )
    elif args.command == "position-snapshot":
        res = experiments.run_position_snapshot(
            cfg, out_dir, location=args.location, message=args.message, execution=execution
        )
    elif args.command == "channel-mse":
        snrs = tuple(float(s) for s in args.snr_list.split(","))
        res = experiments.run_channel_mse_sweep(
            cfg, out_dir, snr_list=snrs, variants=tuple(args.variants.split(",")), execution=execution
        )
    else:
        raise AssertionError(args.command)
    print(f"manifest: {res['manifest']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
