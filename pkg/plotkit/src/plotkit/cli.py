"""Command-line figure rendering from mapbench report files."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import KINDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="plotkit",
        description="Render a mapbench report into one of the standard figures.",
    )
    ap.add_argument("kind", choices=KINDS, help="figure kind")
    ap.add_argument("report", type=Path, help="report JSON (sidecar CSVs alongside)")
    ap.add_argument("out", type=Path, help="output image path")
    ap.add_argument("--reference", type=Path, default=None,
                    help="reference cache .npz for cdf/qq/output-hist overlays")
    ap.add_argument("--bins", type=int, default=40)
    ap.add_argument("--dpi", type=int, default=130)
    ap.add_argument("--title", default=None)
    args = ap.parse_args(argv)
    try:
        meta = render(
            FigureSpec(
                kind=args.kind,
                report_path=args.report,
                out_path=args.out,
                reference_path=args.reference,
                bins=args.bins,
                dpi=args.dpi,
                title=args.title,
            )
        )
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {meta['out_path']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
