"""Command-line frontend: one subcommand per pipeline stage.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
Every successful command writes a manifest recording the config hash, the
seed, stage timings, and digests of the files it read and wrote.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__
from .config import parse_config
from .errors import AgweatherError, ConfigError
from .pipeline import STAGE_ORDER, STAGES, atomic_write_text, file_digest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agweather",
        description="Synthetic weather/survey pipeline and regression battery.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_ORDER + ("all",):
        cmd = sub.add_parser(name, help=f"run the {name} stage"
                             if name != "all" else "run every stage in order")
        cmd.add_argument("--config", required=True, help="INI config path")
        cmd.add_argument("--set", dest="overrides", action="append", default=[],
                         metavar="SECTION.KEY=VALUE",
                         help="override a config value (repeatable)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override [run] seed")
        cmd.add_argument("--out", default=None, help="override [run] out_dir")
        cmd.add_argument("--quiet", action="store_true",
                         help="suppress progress output")
    return parser


def _manifest_path(out_dir: str, command: str) -> str:
    return os.path.join(out_dir, f"manifest_{command}.json")


def _write_manifest(cfg, command, timings, outputs) -> str:
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "version": __version__,
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
        "outputs": {path: file_digest(path) for path in sorted(outputs)},
    }
    path = _manifest_path(cfg.out_dir, command)
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.out is not None:
        overrides.append(f"run.out_dir={args.out}")

    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    stages = STAGE_ORDER if args.command == "all" else (args.command,)
    timings: dict[str, float] = {}
    outputs: list[str] = []
    for name in stages:
        started = time.perf_counter()
        try:
            written = STAGES[name](cfg)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
        except (AgweatherError, OSError, ValueError, FloatingPointError) as exc:
            print(f"error in {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 2
        timings[name] = time.perf_counter() - started
        outputs.extend(written)
        if not args.quiet:
            print(f"[{name}] wrote {len(written)} file(s) in {timings[name]:.2f}s")

    manifest = _write_manifest(cfg, args.command, timings, outputs)
    if not args.quiet:
        print(f"[manifest] {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
