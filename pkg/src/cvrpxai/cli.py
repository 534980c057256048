"""Command line entry point: ``cvrpxai <stage> [--config PATH] [--out DIR] ...``.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .pipeline import STAGES, ConfigError, PipelineConfig, StageError, cmd_run_all, load_config, run_stage

log = logging.getLogger("cvrpxai")

COMMANDS = STAGES + ("run-all",)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvrpxai", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON pipeline config (defaults are used when absent)")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="set every seed in the config")
    parser.add_argument("--scenarios", help="comma-separated scenario ids, e.g. S1,S4")
    parser.add_argument("--estimator", choices=("exact", "sample", "tree"))
    parser.add_argument("--resume", action="store_true", help="continue a partial corpus")
    parser.add_argument("--write-config", metavar="PATH", help="write the effective config and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def effective_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    d = cfg.to_dict()
    if args.out:
        d["out"] = args.out
    if args.scenarios:
        d["scenario"]["ids"] = [s.strip() for s in args.scenarios.split(",") if s.strip()]
    if args.estimator:
        d["explain"]["estimator"] = args.estimator
    cfg = PipelineConfig.from_dict(d)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = effective_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.write_config:
        Path(args.write_config).write_text(cfg.to_text())
        return 0
    out = Path(cfg.out)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if args.command == "run-all":
                manifest = cmd_run_all(cfg, out, resume=args.resume)
                print(json.dumps({"manifest_hash": manifest["manifest_hash"]}))
            else:
                run_stage(args.command, cfg, out, resume=args.resume)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 3
    log.info("%s finished in %s", args.command, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
