"""Procedural test images (no external image corpus needed)."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .raster import RasterImage


def scene(width: int = 600, height: int = 400, seed: int = 0) -> RasterImage:
    """Sky/ground backdrop, a textured field, a bright disc and a few straight bars."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width] / np.array([height, width])[:, None, None]
    img = np.zeros((height, width, 3))
    horizon = 0.55
    sky = yy < horizon
    img[sky] = np.stack([0.45 + 0.3 * yy, 0.6 + 0.3 * yy, np.full_like(yy, 0.9)], -1)[sky]
    grass = ndimage.gaussian_filter(rng.random((height, width)), 1.0)
    ground = np.stack([0.25 + 0.3 * grass, 0.45 + 0.3 * grass, 0.15 + 0.1 * grass], -1)
    img[~sky] = ground[~sky]
    cx, cy, r = 0.35, 0.42, 0.12
    disc = ((xx - cx) * width) ** 2 + ((yy - cy) * height) ** 2 < (r * height) ** 2
    img[disc] = (0.95, 0.8, 0.2)
    bx = int(0.7 * width)
    img[int(0.2 * height):int(0.85 * height), bx:bx + max(4, width // 60)] = (0.15, 0.1, 0.1)
    img[int(0.3 * height):int(0.3 * height) + max(3, height // 80), int(0.6 * width):int(0.9 * width)] = (0.1, 0.1, 0.1)
    return RasterImage(np.clip(img, 0, 1))


def blobs(width: int = 96, height: int = 64, seed: int = 1) -> RasterImage:
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.random((height, width, 3)), (6, 6, 0))
    base = (base - base.min()) / (base.max() - base.min())
    return RasterImage(base)


def stripes(width: int = 80, height: int = 60) -> RasterImage:
    x = np.arange(width)[None, :]
    y = np.arange(height)[:, None]
    g = 0.5 + 0.4 * np.sin(x / 5.0) * np.cos(y / 7.0)
    img = np.repeat(g[:, :, None], 3, axis=2)
    img[height // 3: 2 * height // 3, width // 4: width // 2] = (0.9, 0.2, 0.2)
    return RasterImage(np.clip(img, 0, 1))


def corpus() -> dict:
    return {"scene": scene(120, 80, seed=3), "blobs": blobs(), "stripes": stripes()}
