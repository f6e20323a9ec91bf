"""Command-line entry point.

    phasecool [--config FILE] [--seed N] [--out-dir DIR] [--threads T] COMMAND

Commands: simulate, ensemble, multimode, quantum, preset NAME. Global
flags may also follow the command. Exit codes: 0 success, 1 invalid
config or arguments, 2 runtime or numerical failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, ExperimentConfig, OutputSection, load_config
from .engine import THREADS_ENV
from .experiments import PRESETS, run_ensemble, run_multimode, run_preset, run_quantum, run_simulate
from .io import OutputError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("phasecool")

_RUNNERS = {
    "simulate": run_simulate,
    "ensemble": run_ensemble,
    "multimode": run_multimode,
    "quantum": run_quantum,
}


def _global_flags(parser: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="YAML experiment config")
    parser.add_argument("--seed", type=int, default=default, help="master seed (overrides the config)")
    parser.add_argument("--out-dir", default=default, help="output directory (overrides the config)")
    parser.add_argument("--threads", type=int, default=default,
                        help=f"worker threads for ensembles (default: ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phasecool", description="Phase-adaptive parametric cooling simulator.")
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "one trajectory"), ("ensemble", "seeded ensemble statistics"),
                        ("multimode", "several modes, one actuator"), ("quantum", "variance table and occupancy limit")):
        _global_flags(sub.add_parser(name, help=help_), suppress=True)
    p = sub.add_parser("preset", help="reproduce a figure as data tables")
    p.add_argument("name", help=f"one of: {', '.join(PRESETS)}")
    _global_flags(p, suppress=True)
    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out_dir is not None:
        cfg = replace(cfg, output=OutputSection(dir=args.out_dir))
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "preset":
            if args.name not in PRESETS:
                print(f"error: unknown preset {args.name!r}; available: {', '.join(PRESETS)}", file=sys.stderr)
                return EXIT_CONFIG
            out_dir = args.out_dir or "out"
            summary = run_preset(args.name, out_dir, seed=args.seed or 0, threads=args.threads)
        else:
            cfg = _resolve_config(args)
            out_dir = cfg.output.dir
            if args.command == "multimode" and cfg.modes is None:
                raise ConfigError("the multimode command needs a 'modes' section")
            summary = _RUNNERS[args.command](cfg, out_dir, threads=args.threads)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OutputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %s", out_dir)
    for key in ("late_mean_n", "fitted_rate", "n_final_limit", "max_rel_diff"):
        if key in summary:
            print(f"{key} = {summary[key]!r}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
