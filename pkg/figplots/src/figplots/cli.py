"""Command line entry point: ``render --fig fig3a --in DIR --out PATH``."""

from __future__ import annotations

import argparse
import sys

from .registry import FIGURES
from .render import ArtifactError, render

EXIT_OK = 0
EXIT_ARTIFACT = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render a registered figure from solver CSV artifacts to PNG",
    )
    parser.add_argument("--fig", required=True, choices=sorted(FIGURES), help="figure id")
    parser.add_argument(
        "--in",
        dest="csv_dir",
        required=True,
        metavar="DIR",
        help="directory holding the CSV artifacts",
    )
    parser.add_argument("--out", required=True, metavar="PATH", help="output PNG path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        path = render(args.fig, args.csv_dir, args.out)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
