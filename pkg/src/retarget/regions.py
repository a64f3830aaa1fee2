"""Graph-based colour segmentation and region-weighted importance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import RasterImage, check_field

# Edge weights are measured on the 8-bit intensity scale so that the usual
# scale-of-observation values (k in the hundreds to thousands) keep their
# conventional meaning.
INTENSITY_SCALE = 255.0


@dataclass(frozen=True)
class SegmentationParams:
    k: float = 1000.0
    sigma: float = 0.5
    min_size: int | None = None  # None: 0.1% of the pixel count, at least 20

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be > 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.min_size is not None and self.min_size < 1:
            raise ValueError("min_size must be >= 1")

    def resolved_min_size(self, n_pixels: int) -> int:
        if self.min_size is not None:
            return self.min_size
        return max(20, int(round(0.001 * n_pixels)))


@dataclass
class RegionLabeling:
    labels: np.ndarray  # (h, w) int region ids in [0, region_count)
    region_count: int
    weights: np.ndarray | None = None

    @property
    def shape(self):
        return self.labels.shape

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.region_count)


def smooth_channels(img: RasterImage, sigma: float) -> np.ndarray:
    data = img.data * INTENSITY_SCALE
    if sigma <= 0:
        return data.copy()
    return np.stack([ndimage.gaussian_filter(data[:, :, c], sigma, mode="nearest", truncate=4.0)
                     for c in range(data.shape[2])], axis=2)


def grid_edges(data: np.ndarray):
    """8-connected pixel graph, sorted by (weight, source, destination).

    Each undirected edge appears once with source index < destination index.
    """
    h, w, _ = data.shape
    idx = np.arange(h * w).reshape(h, w)
    src, dst, wts = [], [], []
    # right, down, down-right, down-left
    for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
        r0, r1 = 0, h - dr
        c0, c1 = max(0, -dc), w - max(0, dc)
        a = idx[r0:r1, c0:c1]
        b = idx[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        diff = data[r0:r1, c0:c1] - data[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        src.append(a.ravel())
        dst.append(b.ravel())
        wts.append(np.sqrt((diff * diff).sum(axis=2)).ravel())
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    wts = np.concatenate(wts)
    order = np.lexsort((dst, src, wts))
    return src[order], dst[order], wts[order]


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def compact_labels(roots: np.ndarray, shape) -> tuple[np.ndarray, int]:
    """Relabel to [0, n) in raster-scan order of first appearance."""
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.intp)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse].reshape(shape), first.size


def segment_graph(img: RasterImage, params: SegmentationParams = SegmentationParams()) -> RegionLabeling:
    h, w = img.shape
    n = h * w
    src, dst, wts = grid_edges(smooth_channels(img, params.sigma))
    src_l, dst_l, wts_l = src.tolist(), dst.tolist(), wts.tolist()
    k = float(params.k)

    parent = list(range(n))
    rank = [0] * n
    size = [1] * n
    thresh = [k] * n  # Int(C) + k/|C|, with Int of a singleton = 0

    for a, b, wt in zip(src_l, dst_l, wts_l):
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb or wt > thresh[ra] or wt > thresh[rb]:
            continue
        if rank[ra] < rank[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        if rank[ra] == rank[rb]:
            rank[ra] += 1
        size[ra] += size[rb]
        # edges arrive in ascending order, so wt is the largest MST edge
        thresh[ra] = wt + k / size[ra]

    min_size = params.resolved_min_size(n)
    if min_size > 1:
        for a, b in zip(src_l, dst_l):
            ra = _find(parent, a)
            rb = _find(parent, b)
            if ra != rb and (size[ra] < min_size or size[rb] < min_size):
                if rank[ra] < rank[rb]:
                    ra, rb = rb, ra
                parent[rb] = ra
                if rank[ra] == rank[rb]:
                    rank[ra] += 1
                size[ra] += size[rb]

    roots = np.fromiter((_find(parent, i) for i in range(n)), dtype=np.intp, count=n)
    labels, count = compact_labels(roots, (h, w))
    return RegionLabeling(labels=labels, region_count=count)


def region_weight_map(seg: RegionLabeling, M: np.ndarray):
    """Mean importance per region and the piecewise-constant map it induces."""
    M = check_field(M, "M")
    if M.shape != seg.shape:
        raise ValueError(f"dimension mismatch: labels {seg.shape} vs M {M.shape}")
    flat = seg.labels.ravel()
    sums = np.bincount(flat, weights=M.ravel(), minlength=seg.region_count)
    weights = sums / seg.sizes()
    out = RegionLabeling(labels=seg.labels, region_count=seg.region_count, weights=weights)
    return out, weights[seg.labels]


def region_palette(count: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).random((count, 3))


def render_regions(seg: RegionLabeling, seed: int = 0) -> RasterImage:
    return RasterImage(region_palette(seg.region_count, seed)[seg.labels])
