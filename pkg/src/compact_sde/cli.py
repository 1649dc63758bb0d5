"""Command line entry point.

    compact-sde list
    compact-sde validate CONFIG
    compact-sde run CONFIG|BUILTIN [--out DIR] [--seeds 0,1,2] [--quiet]
    compact-sde check WEIGHTS_FILE

Exit codes: 0 success, 1 failed assertion, 2 configuration or usage error,
3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import BUILTINS, ConfigError, builtin_config, list_builtins, load_config, validate
from .nets import load_mlp
from .runner import RunAbort, run_experiment

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _seeds(text: str) -> list:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("seeds must be nonempty")
    return seeds


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="compact-sde",
                                description="Simulate and check viable SDEs on compact polyhedra.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list builtin experiment configs")
    v = sub.add_parser("validate", help="report every problem in a config without running it")
    v.add_argument("config", help="JSON config file or builtin name")
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("config", help="JSON config file or builtin name")
    r.add_argument("--out", type=Path, default=None, help="output directory")
    r.add_argument("--seeds", type=_seeds, default=None, help="override the seed list, e.g. 0,1,2")
    r.add_argument("--quiet", action="store_true", help="only print failures")
    c = sub.add_parser("check", help="load a network dump and print its summary")
    c.add_argument("weights", type=Path)
    return p


def _raw_config(ref: str) -> dict:
    if ref in BUILTINS:
        return json.loads(json.dumps(BUILTINS[ref]))
    try:
        return json.loads(Path(ref).read_text())
    except OSError as exc:
        raise ConfigError([f"config: cannot read {ref}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON at line {exc.lineno}: {exc.msg}"]) from exc


def _cmd_list(args) -> int:
    for name in list_builtins():
        print(name)
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        raw = _raw_config(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    errors = validate(raw)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    if not errors:
        print("ok")
    return EXIT_CONFIG if errors else EXIT_OK


def _cmd_run(args) -> int:
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = builtin_config(args.config) if args.config in BUILTINS else load_config(args.config)
        if args.seeds is not None or args.out is not None:
            cfg = cfg.with_overrides(seeds=args.seeds, output=args.out)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = run_experiment(cfg)
    except RunAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        for m in res.metrics:
            if m.passed is not None:
                print(m.line())
        print(f"wrote {len(res.files)} files to {res.out_dir}")
    for msg in res.failed_assertions:
        print(f"assertion failed: {msg}", file=sys.stderr)
    return res.exit_code


def _cmd_check(args) -> int:
    try:
        p = load_mlp(args.weights)
    except OSError as exc:
        print(f"error: cannot read {args.weights}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {args.weights}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"sizes {'-'.join(map(str, p.sizes))}")
    print(f"activation {p.activation.value}")
    print(f"seed {p.seed}")
    print(f"sha256 {p.checksum()}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"list": _cmd_list, "validate": _cmd_validate, "run": _cmd_run, "check": _cmd_check}
    return handler[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
