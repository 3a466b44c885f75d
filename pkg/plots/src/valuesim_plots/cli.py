"""Batch plotting CLI.

    plot --kind trends|bars|heatmap --in FILE --out FILE
         [--title TEXT] [--subpopulations all|split] [--manifest FILE]

Exit codes: 0 success, 1 input/schema error, 2 runtime failure.  No image
file is written when the input is rejected.
"""

from __future__ import annotations

import argparse
import sys

from .figures import plot_heatmap, plot_init_final, plot_trends
from .io import EmptyInputError, SchemaMismatchError

KINDS = ("trends", "bars", "heatmap")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plot", description="Render figures from simulation CSV outputs.")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="input", required=True, help="input CSV file")
    p.add_argument("--out", dest="output", required=True, help="output image file")
    p.add_argument("--title", default=None)
    p.add_argument(
        "--subpopulations",
        choices=("all", "split"),
        default=None,
        help="trends only: one whole-population panel, or taxi/bus side by side",
    )
    p.add_argument("--manifest", default=None, help="manifest.json for the seed footnote")
    return p


def render(kind, input_path, title=None, subpopulations=None, manifest=None):
    if kind == "trends":
        return plot_trends(input_path, title=title, subpopulations=subpopulations, manifest_path=manifest)
    if kind == "bars":
        return plot_init_final(input_path, title=title, manifest_path=manifest)
    return plot_heatmap(input_path, title=title, manifest_path=manifest)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        fig = render(args.kind, args.input, args.title, args.subpopulations, args.manifest)
    except (SchemaMismatchError, EmptyInputError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    try:
        fig.savefig(args.output, dpi=150)
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
