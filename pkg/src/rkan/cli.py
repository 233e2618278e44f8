"""``rkan`` command: run a config, check gradients, or replay a bundled replication."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config, parse_config
from .runner import (REPLICATIONS, all_ok, replication_configs, run, summarize, write_csv,
                     write_sidecar)


def _seed_list(text):
    try:
        seeds = [int(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be integers, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def _execute(configs, out, seeds, parallel, labels=None):
    rows = []
    for i, cfg in enumerate(configs):
        part = run(cfg, seeds, parallel)
        label = labels[i] if labels else cfg.experiment
        print(f"[{cfg.hash()}] {label}: {summarize(part)}")
        rows.extend(part)
    write_csv(rows, out)
    write_sidecar(configs, out + ".config.json")
    if len(configs) > 1:
        print(f"overall: {summarize(rows)}")
    print(f"wrote {len(rows)} rows to {out}")
    return 0 if all_ok(rows) else 1


def cmd_run(args):
    cfg = load_config(args.config)
    out = args.out or cfg.output or "results.csv"
    return _execute([cfg], out, args.seeds, args.parallel)


def cmd_gradcheck(args):
    cfg = parse_config(f"experiment = gradcheck\nK = 3\np = 2\nseeds = {args.seed}\n")
    return _execute([cfg], args.out, None, 1)


def cmd_replicate(args):
    pairs = replication_configs(args.target)
    names, configs = zip(*pairs)
    out = args.out or f"{args.target}.csv"
    return _execute(list(configs), out, args.seeds, args.parallel, labels=list(names))


def build_parser():
    parser = argparse.ArgumentParser(prog="rkan", description="Rational KAN experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one config file over its seeds")
    p.add_argument("config")
    p.add_argument("--out", help="CSV path (default: config 'output' or results.csv)")
    p.add_argument("--seeds", type=_seed_list, help="comma-separated seeds, overrides config and RKAN_SEED")
    p.add_argument("--parallel", type=int, default=1, help="worker processes for the seed sweep")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gradcheck", help="finite-difference check of every rKAN layer family")
    p.add_argument("--out", default="gradcheck.csv")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("replicate", help="run a bundled replication")
    p.add_argument("target", choices=REPLICATIONS)
    p.add_argument("--out", help="CSV path (default: <target>.csv)")
    p.add_argument("--seeds", type=_seed_list)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "parallel", 1) < 1:
        print("rkan: --parallel must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"rkan: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
