"""Command-line entry point.

    curricula <plan|gen|sample|pack|extend|train|eval|ablate>
              [--config <path>] [--set k=v]... [--out <dir>]

Exit codes: 0 success, 1 runtime failure, 2 configuration/usage error.
Every pipeline command prints a single JSON summary line; `plan` prints the
schedule table as JSON lines.
"""

from __future__ import annotations

import argparse
import json
import sys

from .ablate import run_ablate
from .config import load_config
from .errors import ConfigError, CurriculaError
from .pipeline import (run_eval, run_extend, run_gen, run_pack, run_sample,
                       run_train)
from .schedule import schedule_table, write_schedule_table

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curricula",
        description="Curriculum-mixture data pipeline and desk-scale LM trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="pipeline config JSON")
        p.add_argument("--set", dest="sets", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry")
        p.add_argument("--out", default=None, help="override the output directory")
        return p

    plan = add("plan", "print the mixture schedule table as JSON lines")
    plan.add_argument("--checkpoints", type=int, default=11,
                      help="number of evenly spaced rows (default 11)")
    add("gen", "generate the synthetic datasets")
    sample = add("sample", "draw instances with the dynamic sampler")
    sample.add_argument("-n", type=int, default=None,
                        help="number of samples (default sampler.n_samples)")
    add("pack", "tokenize sampled instances and pack fixed-length sequences")
    add("extend", "extend the vocabulary and model matrices with new tokens")
    add("train", "train the model on the packed sequences")
    ev = add("eval", "evaluate perplexity of the checkpoint on a packed file")
    ev.add_argument("--packed", default=None, help="packed eval file")
    add("ablate", "run the dynamic-vs-fixed sampler ablation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.sets, args.out)
        if args.command == "plan":
            rows = schedule_table(cfg.mix, args.checkpoints)
            write_schedule_table(rows, sys.stdout)
            return EXIT_OK
        if args.command == "gen":
            summary = run_gen(cfg)
        elif args.command == "sample":
            summary = run_sample(cfg, args.n)
        elif args.command == "pack":
            summary = run_pack(cfg)
        elif args.command == "extend":
            summary = run_extend(cfg)
        elif args.command == "train":
            summary = run_train(cfg)
        elif args.command == "eval":
            summary = run_eval(cfg, args.packed)
        elif args.command == "ablate":
            summary = run_ablate(cfg)
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"curricula: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CurriculaError as exc:
        print(f"curricula: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
