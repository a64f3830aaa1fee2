"""Piecewise-affine rendering of a deformed mesh and debug overlays."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .geometry import line_pixels, signed_areas, triangle_pixels
from .raster import RasterImage, sample_bilinear

HIGHLIGHT = (1.0, 0.0, 0.0)


class FlippedTriangleError(ValueError):
    pass


def affine_map(dst: np.ndarray, src: np.ndarray) -> np.ndarray:
    """2x3 matrix ``A`` with ``A @ (x, y, 1) = source point`` for each vertex pair."""
    D = np.hstack([dst, np.ones((3, 1))])
    return np.linalg.solve(D, src).T


def warp_render(src: RasterImage, vertices: np.ndarray, triangles: np.ndarray, c_prime: np.ndarray,
                target_w: int, target_h: int) -> RasterImage:
    """Map every deformed triangle back onto its source triangle and sample bilinearly."""
    c_prime = np.asarray(c_prime, dtype=np.float64)
    if np.any(signed_areas(c_prime, triangles) <= 0):
        raise FlippedTriangleError("deformed mesh contains a flipped or collapsed triangle")
    out = np.zeros((target_h, target_w, src.channels))
    covered = np.zeros((target_h, target_w), bool)
    for tri in triangles:
        dst = c_prime[tri]
        rows, cols, _ = triangle_pixels(dst, target_w, target_h)
        if rows.size == 0:
            continue
        A = affine_map(dst, vertices[tri])
        sx = A[0, 0] * (cols + 0.5) + A[0, 1] * (rows + 0.5) + A[0, 2]
        sy = A[1, 0] * (cols + 0.5) + A[1, 1] * (rows + 0.5) + A[1, 2]
        out[rows, cols] = sample_bilinear(src.data, sy - 0.5, sx - 0.5)
        covered[rows, cols] = True
    if not covered.all():
        if not covered.any():
            raise ValueError("no output pixel is covered by the mesh")
        _, (ri, ci) = ndimage.distance_transform_edt(~covered, return_indices=True)
        out = out[ri, ci]
    return RasterImage(np.clip(out, 0.0, 1.0))


def _as_rgb(img: RasterImage) -> np.ndarray:
    data = np.array(img.data)
    return np.repeat(data, 3, axis=2) if img.channels == 1 else data


def draw_segments(img: RasterImage, segments, color=HIGHLIGHT) -> RasterImage:
    """Draw 1-px segments given in continuous coordinates ``((x0, y0), (x1, y1))``."""
    data = _as_rgb(img)
    h, w = img.shape
    for (x0, y0), (x1, y1) in segments:
        rr, cc = line_pixels(x0 - 0.5, y0 - 0.5, x1 - 0.5, y1 - 0.5)
        data[np.clip(rr, 0, h - 1), np.clip(cc, 0, w - 1)] = color
    return RasterImage(data)


def mesh_overlay(img: RasterImage, vertices: np.ndarray, triangles: np.ndarray, color=HIGHLIGHT) -> RasterImage:
    if len(triangles) == 0:
        return img
    t = np.asarray(triangles)
    edges = np.unique(np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1), axis=0)
    return draw_segments(img, [(vertices[a], vertices[b]) for a, b in edges], color)


def mask_overlay(img: RasterImage, mask: np.ndarray, color=HIGHLIGHT) -> RasterImage:
    data = _as_rgb(img)
    data[mask] = color
    return RasterImage(data)
