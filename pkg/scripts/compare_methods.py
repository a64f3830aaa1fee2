"""Compare the four retargeting methods on the synthetic scene.

The scene contains a yellow disc; a content-aware method should keep it
round while the background absorbs the resize.  For every method and
target we report runtime and the disc's bounding-box aspect ratio in the
output (1.0 means undistorted), and write the output images to --out.

    python3 scripts/compare_methods.py --out /tmp/compare
"""
import argparse
import time
from pathlib import Path

import numpy as np

from retarget import synthetic
from retarget.pipeline import METHODS, RunConfig, retarget_mesh
from retarget.raster import encode_image, resample_bilinear
from retarget.seam import seam_retarget

DISC = np.array([0.95, 0.8, 0.2])


def disc_aspect(data: np.ndarray) -> float:
    mask = np.abs(data - DISC).max(axis=2) < 0.08
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return float("nan")
    return (np.ptp(cols) + 1) / (np.ptp(rows) + 1)


def run(method, img, tw, th):
    if method == "scale":
        return resample_bilinear(img, tw, th), ""
    if method.startswith("seam-"):
        return seam_retarget(img, tw, th, method.split("-", 1)[1]), ""
    res = retarget_mesh(img, tw, th, RunConfig(input=Path("scene"), output=Path("out")))
    return res.image, f"{res.state.status}, {res.state.iterations} it"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=300)
    ap.add_argument("--height", type=int, default=200)
    ap.add_argument("--targets", default="0.5x1,0.75x1,1x0.7,1.3x1",
                    help="comma-separated width-factor x height-factor pairs")
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    img = synthetic.scene(args.width, args.height)
    print(f"source {img.width}x{img.height}, disc aspect {disc_aspect(img.data):.3f}")
    print(f"{'target':>10} {'method':>14} {'time s':>8} {'disc aspect':>12}  notes")
    for pair in args.targets.split(","):
        fx, fy = (float(v) for v in pair.split("x"))
        tw, th = round(img.width * fx), round(img.height * fy)
        for method in METHODS:
            t0 = time.perf_counter()
            out, note = run(method, img, tw, th)
            dt = time.perf_counter() - t0
            aspect = disc_aspect(out.data)
            shown = "removed" if np.isnan(aspect) else f"{aspect:.3f}"
            print(f"{tw:>4}x{th:<5} {method:>14} {dt:8.2f} {shown:>12}  {note}")
            if args.out:
                args.out.mkdir(parents=True, exist_ok=True)
                encode_image(out, args.out / f"scene_{tw}x{th}_{method}.png")


if __name__ == "__main__":
    main()
