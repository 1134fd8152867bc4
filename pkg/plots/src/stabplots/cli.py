"""stabplot: turn stabindex CSV/JSON outputs into figures."""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .render import PlotJob, render


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stabplot")
    sub = ap.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("basin", help="classified grid with analytic curves overlaid")
    p.add_argument("--map", dest="map_csv", required=True)
    p.add_argument("--report", dest="report_json")
    p.add_argument("--out", dest="out_path", required=True)

    p = sub.add_parser("loglog", help="fraction ladder with fitted slopes")
    p.add_argument("--ladder", dest="ladder_csv", required=True)
    p.add_argument("--report", dest="report_json", required=True)
    p.add_argument("--out", dest="out_path", required=True)

    p = sub.add_parser("sweep", help="measured sigma against the exact curve")
    p.add_argument("--csv", dest="sweep_csv", required=True)
    p.add_argument("--out", dest="out_path", required=True)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kwargs = {k: v for k, v in vars(args).items() if k != "kind"}
    try:
        path = render(PlotJob(kind=args.kind, **kwargs))
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
