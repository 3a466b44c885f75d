"""Command-line front end.

    simulate <config> [--out DIR] [--seed N] [--replications K]
                      [--experiment baseline|init|conformity]
                      [--backend auto|compiled|python] [--dump-graph]

Exit codes: 0 success, 1 configuration/validation error, 2 runtime failure.
The output directory resolves as --out, then the config file's ``out`` key,
then $VALUESIM_OUT, then ./results.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import yaml

from ._backend import get_backend
from .errors import ValidationError
from .experiments import EXPERIMENT_KINDS, parse_config, run_experiment

ENV_OUT = "VALUESIM_OUT"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Run identity-driven transit-choice experiments and write CSV results.",
    )
    p.add_argument("config", help="experiment configuration file (YAML; may be empty for defaults)")
    p.add_argument("--out", help="output directory (default: config 'out', $VALUESIM_OUT, ./results)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--replications", type=int, help="override the replication count")
    p.add_argument("--experiment", choices=EXPERIMENT_KINDS, help="override the experiment kind")
    p.add_argument("--backend", default=None, help="kernel backend: auto, compiled, or python")
    p.add_argument("--dump-graph", action="store_true", help="write each run's graph as an edge list")
    p.add_argument("--quiet", action="store_true", help="suppress per-run progress output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = parse_config(args.config)
        if args.experiment:
            spec = dataclasses.replace(spec, kind=args.experiment)
        if args.replications is not None:
            spec = dataclasses.replace(spec, replications=args.replications)
        if args.seed is not None:
            spec = dataclasses.replace(
                spec, base=dataclasses.replace(spec.base, master_seed=args.seed)
            )
        if args.dump_graph:
            spec = dataclasses.replace(spec, dump_graph=True)
        out_dir = args.out or spec.output_dir or os.environ.get(ENV_OUT) or "results"
        backend = get_backend(args.backend)
    except (ValidationError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    progress = None if args.quiet else lambda name: print(f"running {name}", file=sys.stderr)
    try:
        manifest = run_experiment(spec, out_dir, backend=backend.name, progress=progress)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    print(f"{manifest['experiment']}: {len(manifest['runs'])} run(s) -> {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
