"""Script entry point: plotkit CSV_PATH OUT_DIR [--whiskers].

Exit codes: 0 rendered (or warned about an empty CSV), 2 unreadable or
schema-mismatched input.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .figures import FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render benchmark CSVs into per-configuration panels",
    )
    parser.add_argument("csv", help="input result CSV")
    parser.add_argument("out_dir", help="directory for the panel images")
    parser.add_argument(
        "--whiskers", action="store_true",
        help="add min/max whiskers across seeds to the throughput curves",
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(args.csv, args.out_dir, whiskers=args.whiskers)
    try:
        written = render(spec)
    except (SchemaError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if not written:
        print("warning: no result rows, nothing to draw")
        return 0
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
