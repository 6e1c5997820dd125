"""export-features command line entry point."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .export import ExportError, ExportSpec, WeightsError, export_features


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="export-features",
        description="Export CNN block-2 feature maps as QTF1 tensors")
    p.add_argument("--input", required=True, nargs="+",
                   help="image path(s) or glob pattern(s)")
    p.add_argument("--resolution", type=int, default=1024,
                   help="square input resolution (must be divisible by 8)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--weights", default="pretrained",
                   help="'pretrained', 'random', or a local .pth path")
    p.add_argument("--version", action="version", version=__version__)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = ExportSpec(inputs=tuple(args.input), out_dir=args.out,
                          resolution=args.resolution, weights=args.weights)
        written = export_features(spec)
    except ExportError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except WeightsError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
