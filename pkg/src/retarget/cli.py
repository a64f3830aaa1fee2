"""Command-line entry point: ``retarget --input in.png --output out.png --width 50%``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .pipeline import METHODS, RunConfig, run_pipeline


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="retarget", description="Content-aware image retargeting.")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output", required=True, type=Path)
    p.add_argument("--width", default="100%", help="target width in px or N%%")
    p.add_argument("--height", default="100%", help="target height in px or N%%")
    p.add_argument("--method", choices=METHODS, default="mesh")

    imp = p.add_argument_group("importance map")
    imp.add_argument("--alpha", type=float, default=1.2)
    imp.add_argument("--beta", type=float, default=1.5)
    imp.add_argument("--gamma", type=float, default=2.0)

    seg = p.add_argument_group("segmentation")
    seg.add_argument("--seg-k", type=float, default=1000.0)
    seg.add_argument("--seg-sigma", type=float, default=0.5)
    seg.add_argument("--seg-min-size", type=int, default=None)

    mesh = p.add_argument_group("mesh and solver")
    mesh.add_argument("--mu", type=float, default=0.9)
    mesh.add_argument("--tau", type=float, default=0.4)
    mesh.add_argument("--eps-t", type=float, default=0.02)
    mesh.add_argument("--eps-p", type=float, default=0.05)
    mesh.add_argument("--mesh-spacing", type=float, default=None)
    mesh.add_argument("--mesh-jitter", type=float, default=0.15)
    mesh.add_argument("--seed", type=int, default=0)
    mesh.add_argument("--vertex-tol", type=float, default=0.5)
    mesh.add_argument("--factor-tol", type=float, default=0.1)

    p.add_argument("--debug-dir", type=Path, default=None)
    p.add_argument("--energy-map", type=Path, default=None,
                   help="grayscale PNG/PGM used as seam energy (seam methods only)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    opts = vars(args)
    opts.pop("verbose")
    return run_pipeline(RunConfig(**opts))


if __name__ == "__main__":
    sys.exit(main())
