"""Importance map: graph-based saliency, texture-suppressed gradients and
Hough feature lines, blended into a single map in [0, 1]."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import line_pixels
from .raster import RasterImage, check_field, gradient_energy, normalize_unit, resample_array, to_luminance


@dataclass(frozen=True)
class ImportanceParams:
    alpha: float = 1.2
    beta: float = 1.5
    gamma: float = 2.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("beta and gamma must be >= 0")


# --- saliency --------------------------------------------------------------

GBVS_MIN_SIDE = 32
GBVS_GRID = 32
GBVS_LEVELS = (128, 64)
GBVS_FILTER_SIGMA = 2.0
GBVS_EPS = 1e-4
GBVS_TOL = 1e-6
GBVS_MAX_ITER = 10_000
ORIENTATIONS = (0.0, 45.0, 90.0, 135.0)


class SaliencyConvergenceError(RuntimeError):
    pass


def _fit_max_dim(h: int, w: int, max_dim: int) -> tuple[int, int]:
    s = max_dim / max(h, w)
    return max(2, int(round(h * s))), max(2, int(round(w * s)))


@functools.lru_cache(maxsize=16)
def _proximity_kernel(gh: int, gw: int) -> np.ndarray:
    """Gaussian distance kernel on a gh x gw grid, symmetrically balanced so
    every row sums to one (a uniform field then has a uniform equilibrium)."""
    sigma = max(gh, gw) / 6.0
    yy, xx = np.mgrid[0:gh, 0:gw]
    pts = np.stack([yy.ravel(), xx.ravel()], axis=1).astype(np.float64)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    k = np.exp(-d2 / (2.0 * sigma * sigma))
    d = np.ones(len(k))
    for _ in range(1000):
        d_new = np.sqrt(d / (k @ d))
        if np.max(np.abs(d_new - d)) < 1e-14:
            d = d_new
            break
        d = d_new
    k = d[:, None] * k * d[None, :]
    k.setflags(write=False)
    return k


def markov_equilibrium(feature: np.ndarray, eps: float = GBVS_EPS) -> np.ndarray:
    """Equilibrium distribution of the dissimilarity-weighted chain on a grid."""
    gh, gw = feature.shape
    f = feature.ravel()
    kernel = _proximity_kernel(gh, gw)
    weights = (np.abs(f[:, None] - f[None, :]) + eps) * kernel
    trans = weights / weights.sum(axis=1, keepdims=True)
    pi = np.full(f.size, 1.0 / f.size)
    for _ in range(GBVS_MAX_ITER):
        # lazy step: same equilibrium, no periodic oscillation
        nxt = 0.5 * (pi + pi @ trans)
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < GBVS_TOL:
            pi = nxt
            break
        pi = nxt
    else:
        raise SaliencyConvergenceError("saliency chain did not reach equilibrium")
    if abs(pi.sum() - 1.0) > 1e-9:
        raise SaliencyConvergenceError("equilibrium is not a distribution")
    return pi.reshape(gh, gw)


def _feature_maps(level: np.ndarray) -> list[np.ndarray]:
    s = GBVS_FILTER_SIGMA
    gxx = ndimage.gaussian_filter(level, s, order=(0, 2), mode="reflect")
    gyy = ndimage.gaussian_filter(level, s, order=(2, 0), mode="reflect")
    gxy = ndimage.gaussian_filter(level, s, order=(1, 1), mode="reflect")
    maps = [level]
    for deg in ORIENTATIONS:
        t = np.deg2rad(deg)
        c, sn = np.cos(t), np.sin(t)
        maps.append(np.abs(c * c * gxx + 2 * c * sn * gxy + sn * sn * gyy))
    return maps


def gbvs_saliency(lum: np.ndarray) -> np.ndarray:
    """Reduced graph-based visual saliency of a luminance field, in [0, 1]."""
    lum = check_field(lum, "luminance")
    h, w = lum.shape
    if min(h, w) < GBVS_MIN_SIDE:
        s = GBVS_MIN_SIDE / min(h, w)
        big = resample_array(lum, max(GBVS_MIN_SIDE, round(w * s)), max(GBVS_MIN_SIDE, round(h * s)))
        return np.clip(resample_array(gbvs_saliency(big), w, h), 0.0, 1.0)

    gh, gw = _fit_max_dim(h, w, GBVS_GRID)
    acc = np.zeros((gh, gw))
    for max_dim in GBVS_LEVELS:
        lh, lw = _fit_max_dim(h, w, max_dim)
        level = resample_array(lum, lw, lh)
        for fmap in _feature_maps(level):
            coarse = normalize_unit(resample_array(fmap, gw, gh))
            acc += markov_equilibrium(coarse)
    sal = resample_array(acc, w, h)
    peak = sal.max()
    return sal / peak if peak > 0 else np.zeros_like(sal)


# --- texture suppression ---------------------------------------------------

SUPPRESSED_VALUE = 0.1


def texture_suppress(E: np.ndarray, Y: np.ndarray, alpha: float, beta: float):
    """Flatten weak-gradient (texture) pixels of ``E`` and blend with ``Y``.

    Returns ``(E_mod, W)`` with ``W = E_mod + beta * Y``.
    """
    E = check_field(E, "E")
    Y = check_field(Y, "Y")
    if E.shape != Y.shape:
        raise ValueError(f"dimension mismatch: E {E.shape} vs Y {Y.shape}")
    E_mod = np.where(Y < alpha * Y.mean(), SUPPRESSED_VALUE, E)
    return E_mod, E_mod + beta * Y


# --- Hough feature lines ---------------------------------------------------

HOUGH_EDGE_PERCENTILE = 90.0
HOUGH_MAX_PEAKS = 20
HOUGH_PEAK_FRACTION = 0.3
HOUGH_FILL_GAP = 5.0
HOUGH_MIN_FRACTION = 0.1
HOUGH_NHOOD_THETA = 2
HOUGH_NHOOD_RHO = 6


@dataclass(frozen=True)
class LineSegment:
    p0: tuple[float, float]
    p1: tuple[float, float]
    theta: float = 0.0  # normal angle of the accumulator bin, degrees
    rho: float = 0.0

    @property
    def length(self) -> float:
        return float(np.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]))

    @property
    def angle(self) -> float:
        """Direction of the segment in degrees, in [0, 180)."""
        return float(np.degrees(np.arctan2(self.p1[1] - self.p0[1], self.p1[0] - self.p0[0])) % 180.0)


def edge_mask(lum: np.ndarray) -> np.ndarray:
    g = gradient_energy(lum, "L2")
    return (g > np.percentile(g, HOUGH_EDGE_PERCENTILE)) & (g > 0)


def hough_accumulator(edges: np.ndarray):
    """Vote edge pixels into a (rho, theta) table with 1 px / 1 degree bins."""
    h, w = edges.shape
    diag = int(np.ceil(np.hypot(h - 1, w - 1)))
    thetas = np.deg2rad(np.arange(180.0))
    rows, cols = np.nonzero(edges)
    acc = np.zeros((2 * diag + 1, thetas.size), dtype=np.int64)
    if rows.size:
        rho = np.rint(cols[:, None] * np.cos(thetas) + rows[:, None] * np.sin(thetas)).astype(np.intp) + diag
        t_idx = np.broadcast_to(np.arange(thetas.size), rho.shape)
        np.add.at(acc, (rho.ravel(), t_idx.ravel()), 1)
    return acc, diag


def hough_peaks(acc: np.ndarray, max_peaks: int = HOUGH_MAX_PEAKS, fraction: float = HOUGH_PEAK_FRACTION):
    """Greedy peak picking with neighbourhood suppression."""
    work = acc.astype(np.float64).copy()
    top = work.max() if work.size else 0.0
    peaks = []
    if top <= 0:
        return peaks
    threshold = fraction * top
    for _ in range(max_peaks):
        idx = int(np.argmax(work))
        r, t = divmod(idx, work.shape[1])
        if work[r, t] < threshold or work[r, t] <= 0:
            break
        peaks.append((r, t))
        work[max(r - HOUGH_NHOOD_RHO, 0):r + HOUGH_NHOOD_RHO + 1,
             max(t - HOUGH_NHOOD_THETA, 0):t + HOUGH_NHOOD_THETA + 1] = -1.0
    return peaks


def _trace_segments(edges, rho_idx, theta_deg, diag, fill_gap, min_length):
    rows, cols = np.nonzero(edges)
    t = np.deg2rad(theta_deg)
    c, s = np.cos(t), np.sin(t)
    on_line = np.rint(cols * c + rows * s).astype(np.intp) + diag == rho_idx
    rows, cols = rows[on_line], cols[on_line]
    if rows.size == 0:
        return []
    # position along the line direction (-sin, cos)
    pos = -cols * s + rows * c
    order = np.lexsort((cols, rows, pos))
    rows, cols, pos = rows[order], cols[order], pos[order]
    breaks = np.nonzero(np.diff(pos) > fill_gap)[0]
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [rows.size - 1]])
    out = []
    for a, b in zip(starts, ends):
        seg = LineSegment((float(cols[a]), float(rows[a])), (float(cols[b]), float(rows[b])),
                          theta=float(theta_deg), rho=float(rho_idx - diag))
        if seg.length >= min_length:
            out.append(seg)
    return out


def hough_line_map(lum: np.ndarray):
    """Detect long straight feature lines; returns ``(H, segments)``.

    ``H`` is 1 on the rasterised kept segments and 0 elsewhere. Segments
    shorter than a tenth of the image diagonal are discarded.
    """
    lum = check_field(lum, "luminance")
    h, w = lum.shape
    if h < 8 or w < 8:
        raise ValueError("hough_line_map needs at least an 8x8 field")
    H = np.zeros((h, w))
    edges = edge_mask(lum)
    if not edges.any():
        return H, []
    acc, diag = hough_accumulator(edges)
    min_length = HOUGH_MIN_FRACTION * np.hypot(h, w)
    segments = []
    for r, t in hough_peaks(acc):
        segments.extend(_trace_segments(edges, r, float(t), diag, HOUGH_FILL_GAP, min_length))
    for seg in segments:
        rr, cc = line_pixels(seg.p0[0], seg.p0[1], seg.p1[0], seg.p1[1])
        H[np.clip(rr, 0, h - 1), np.clip(cc, 0, w - 1)] = 1.0
    return H, segments


# --- combination -----------------------------------------------------------

def combine_importance(G, E_mod, W, H, gamma: float) -> np.ndarray:
    fields = [check_field(f, n) for f, n in ((G, "G"), (E_mod, "E"), (W, "W"), (H, "H"))]
    if len({f.shape for f in fields}) != 1:
        raise ValueError("dimension mismatch between importance components")
    G, E_mod, W, H = fields
    return normalize_unit(normalize_unit(G) * normalize_unit(E_mod) + normalize_unit(W) + gamma * normalize_unit(H))


@dataclass
class ImportanceMaps:
    G: np.ndarray
    E: np.ndarray
    Y: np.ndarray
    E_mod: np.ndarray
    W: np.ndarray
    H: np.ndarray
    M: np.ndarray
    lines: list = field(default_factory=list)


def compute_importance(img: RasterImage, params: ImportanceParams = ImportanceParams()) -> ImportanceMaps:
    lum = to_luminance(img)
    G = gbvs_saliency(lum)
    E = gradient_energy(lum, "L1")
    H, lines = hough_line_map(lum) if min(lum.shape) >= 8 else (np.zeros_like(lum), [])
    Y = gradient_energy(lum, "L2")
    E_mod, W = texture_suppress(E, Y, params.alpha, params.beta)
    M = combine_importance(G, E_mod, W, H, params.gamma)
    return ImportanceMaps(G=G, E=E, Y=Y, E_mod=E_mod, W=W, H=H, M=M, lines=lines)
