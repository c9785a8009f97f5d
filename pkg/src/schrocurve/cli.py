"""Command-line front end.

    schrocurve simulate    --config cfg.toml [--seed N] [--out DIR] [--workers N]
    schrocurve verify SUITE [--config cfg.toml] [--seed N] [--out DIR]
    schrocurve noise-sample [--config cfg.toml] [--seed N] [--out DIR]
    schrocurve info        [--config cfg.toml] [--seed N]

Exit status is 0 iff every enabled check passed.  SCHROCURVE_WORKERS is
the fallback for --workers.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config, resolve_config
from .runs import cmd_info, cmd_noise_sample, cmd_simulate, cmd_verify
from .verify import SUITE_NAMES


def _add_common(p: argparse.ArgumentParser, out_default: str | None):
    p.add_argument("--config", help="TOML (or JSON) run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    if out_default is not None:
        p.add_argument("--out", default=out_default, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schrocurve",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the stochastic solver batch")
    _add_common(p, out_default=None)
    p.add_argument("--out", default=None, help="output directory (default: config output.dir)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (fallback: SCHROCURVE_WORKERS)")

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=SUITE_NAMES + ("all",))
    _add_common(p, out_default=None)
    p.add_argument("--out", default=None, help="optional report directory")

    p = sub.add_parser("noise-sample", help="dump noise realizations and covariance")
    _add_common(p, out_default="runs/noise")

    p = sub.add_parser("info", help="print the resolved configuration and predictions")
    _add_common(p, out_default=None)
    return parser


def _load(args) -> dict:
    if args.config:
        return load_config(args.config)
    return resolve_config({})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "simulate":
            out = args.out or cfg["output"]["dir"]
            manifest = cmd_simulate(cfg, out, seed=args.seed, workers=args.workers)
            ok = all(manifest["verdicts"].values())
            print(json.dumps({"out": str(out), "verdicts": manifest["verdicts"],
                              "horizon": manifest["horizon"]["T0"],
                              "K": manifest["horizon"]["K"]}, indent=1))
            return 0 if ok else 1
        if args.command == "verify":
            manifest = cmd_verify(args.suite, cfg, out_dir=args.out,
                                  seed=args.seed if args.seed is not None else 0)
            for suite, info in manifest["suites"].items():
                for name, passed in info["checks"].items():
                    print(f"[{'PASS' if passed else 'FAIL'}] {name}")
                print(f"suite {suite}: {'PASS' if info['passed'] else 'FAIL'} "
                      f"({info['elapsed_s']:.1f}s)")
            return 0 if manifest["all_passed"] else 1
        if args.command == "noise-sample":
            manifest = cmd_noise_sample(cfg, args.out, seed=args.seed)
            print(json.dumps({"out": args.out, "verdicts": manifest["verdicts"],
                              "max_rel_dev": manifest["covariance_max_rel_dev"]}, indent=1))
            return 0 if all(manifest["verdicts"].values()) else 1
        if args.command == "info":
            print(json.dumps(cmd_info(cfg, seed=args.seed), indent=1, default=str))
            return 0
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
