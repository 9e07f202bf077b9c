"""Command-line interface.

    spinpair run <config> [--out DIR] [--seed N] [--threads N] [--override k=v]...
    spinpair validate <config> [--override k=v]...
    spinpair report <resultset-dir> [--out FILE]

Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, load_config
from .io import read_results, report_csv
from .recipes import DEFAULT_THREADS_ENV, run_experiment


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _parse_overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"--override expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="spinpair",
                 description="Spin-noise simulator for radiatively coupled "
                             "atom pairs")
    sub = ap.add_subparsers(dest="command")
    run = sub.add_parser("run", help="execute a recipe")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None,
                     help="override master_seed")
    run.add_argument("--threads", type=int, default=None,
                     help=f"worker processes (default ${DEFAULT_THREADS_ENV} or 1)")
    run.add_argument("--override", action="append", metavar="KEY=VALUE",
                     help="override a config key")
    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("config")
    val.add_argument("--override", action="append", metavar="KEY=VALUE")
    rep = sub.add_parser("report", help="aggregate a stored ResultSet to CSV")
    rep.add_argument("resultset_dir")
    rep.add_argument("--out", default=None, help="output CSV path")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else 1
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "validate":
            cfg = load_config(args.config, _parse_overrides(args.override))
            print(f"OK recipe={cfg.recipe} config_hash={cfg.config_hash()}")
            return 0
        if args.command == "run":
            overrides = _parse_overrides(args.override)
            if args.seed is not None:
                overrides["master_seed"] = str(args.seed)
            cfg = load_config(args.config, overrides)
            out_dir = args.out or f"results_{cfg.recipe}_{cfg.config_hash()}"
            threads = args.threads
            if threads is None:
                threads = int(os.environ.get(DEFAULT_THREADS_ENV, "1"))
            try:
                rs = run_experiment(cfg, out_dir, workers=threads)
            except Exception as err:   # noqa: BLE001
                print(f"error: {err}", file=sys.stderr)
                return 2
            print(f"wrote {len(rs.points)} point(s) to {out_dir} "
                  f"(config_hash={rs.config_hash})")
            return 0
        if args.command == "report":
            try:
                rs = read_results(args.resultset_dir)
            except OSError as err:
                print(f"error: {err}", file=sys.stderr)
                return 2
            out = args.out or os.path.join(args.resultset_dir, "aggregate.csv")
            report_csv(rs, out)
            print(f"wrote {out}")
            return 0
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
