"""Command-line front end: run experiments, generate test functions,
ingest elevation grids, and summarize result CSVs."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .harness import (
    ConfigError,
    load_config,
    read_records,
    run_experiment,
    summarize,
)
from .problems import GridFormatError, gen_random_function, load_elevation_grid, save_elevation_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    records = run_experiment(cfg)
    if cfg.out:
        print(f"wrote {len(records)} records to {cfg.out}")
    else:
        print(f"ran {len(records)} records (no out path configured)")
    return EXIT_OK


def _cmd_gen_functions(args) -> int:
    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    fns = [gen_random_function(args.seed + k) for k in range(args.count)]
    np.savez(
        args.out,
        xs=fns[0].xs,
        values=np.stack([f.values for f in fns]),
        seeds=np.array([f.seed for f in fns]),
    )
    print(f"wrote {args.count} functions to {args.out}")
    return EXIT_OK


def _cmd_ingest_grid(args) -> int:
    grid = load_elevation_grid(args.infile, fmt=args.format)
    save_elevation_grid(grid, args.out)
    h, w = grid.shape
    print(f"ingested {h}x{w} grid to {args.out}")
    return EXIT_OK


def _cmd_summarize(args) -> int:
    records = read_records(args.infile)
    if not records:
        raise ConfigError(f"no records in {args.infile}")
    lo, hi = (int(t) for t in args.window.split(":"))
    try:
        rows = summarize(records, stat=args.stat.replace("-", "_"),
                         window=(lo, hi), normalize_by=args.normalize_by)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"{'policy':<16}{'median':>14}{'q25':>14}{'q75':>14}{'replicas':>10}")
    for row in rows:
        print(
            f"{row['policy']:<16}{row['median']:>14.6g}{row['q25']:>14.6g}"
            f"{row['q75']:>14.6g}{row['replicas']:>10d}"
        )
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcbo", description="sequential-design experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_gen = sub.add_parser("gen-functions", help="sample random test functions to an npz")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen_functions)

    p_grid = sub.add_parser("ingest-grid", help="validate and normalize an elevation grid")
    p_grid.add_argument("--in", dest="infile", required=True)
    p_grid.add_argument("--format", default="ascii", choices=["ascii"])
    p_grid.add_argument("--out", required=True)
    p_grid.set_defaults(func=_cmd_ingest_grid)

    p_sum = sub.add_parser("summarize", help="summarize a results CSV per policy")
    p_sum.add_argument("--in", dest="infile", required=True)
    p_sum.add_argument("--normalize-by", default=None)
    p_sum.add_argument("--stat", default="cum-regret", choices=["cum-regret", "mean-metric"])
    p_sum.add_argument("--window", default="20:50")
    p_sum.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if exc.code is not None else 0
        return EXIT_CONFIG if code not in (0,) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, GridFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
