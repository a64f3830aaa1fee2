"""Seam carving: backward and forward cumulative energies, backtracking,
removal, batch insertion, and a fixed-order retargeting driver.

All DP routines work on vertical seams; horizontal seams are handled by
transposing the inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import MIN_SIZE, RasterImage, check_field, gradient_energy, to_luminance

VERTICAL, HORIZONTAL = "vertical", "horizontal"
BACKWARD, FORWARD = "backward", "forward"


@dataclass(frozen=True)
class SeamPath:
    axis: str
    coords: np.ndarray  # one column per row (vertical) / one row per column (horizontal)
    cost: float

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.intp)
        if c.size > 1 and np.any(np.abs(np.diff(c)) > 1):
            raise ValueError("seam is not 8-connected")
        object.__setattr__(self, "coords", c)


def _shift(row: np.ndarray, by: int, fill: float) -> np.ndarray:
    out = np.full_like(row, fill)
    if by > 0:
        out[by:] = row[:-by]
    else:
        out[:by] = row[-by:]
    return out


def cumulative_backward(e: np.ndarray) -> np.ndarray:
    """M(i, j) = e(i, j) + min of the up-to-three connected cells above."""
    e = np.asarray(e, dtype=np.float64)
    if e.ndim != 2 or min(e.shape) < 1:
        raise ValueError("energy must be a non-empty 2-D field")
    M = e.copy()
    for i in range(1, e.shape[0]):
        prev = M[i - 1]
        best = np.minimum(prev, np.minimum(_shift(prev, 1, np.inf), _shift(prev, -1, np.inf)))
        M[i] += best
    return M


def forward_costs(lum: np.ndarray):
    """Per-pixel inserted-edge costs ``(C_up, C_left, C_right)``.

    Differences that reach outside the image count as zero.
    """
    h, w = lum.shape
    cu = np.zeros((h, w))
    cl = np.zeros((h, w))
    cr = np.zeros((h, w))
    if w >= 3:
        cu[:, 1:-1] = np.abs(lum[:, 2:] - lum[:, :-2])
    cl[1:, 1:] = np.abs(lum[:-1, 1:] - lum[1:, :-1])
    cr[1:, :-1] = np.abs(lum[:-1, :-1] - lum[1:, 1:])
    return cu, cl, cr


def cumulative_forward(lum: np.ndarray, P: np.ndarray | None = None) -> np.ndarray:
    """Forward-energy DP; the first row is ``P`` alone."""
    lum = check_field(lum, "luminance")
    P = np.zeros_like(lum) if P is None else np.asarray(P, dtype=np.float64)
    if P.shape != lum.shape:
        raise ValueError(f"dimension mismatch: lum {lum.shape} vs P {P.shape}")
    cu, cl, cr = forward_costs(lum)
    M = P.copy()
    for i in range(1, lum.shape[0]):
        prev = M[i - 1]
        up = prev + cu[i]
        from_left = _shift(prev, 1, np.inf) + cu[i] + cl[i]
        from_right = _shift(prev, -1, np.inf) + cu[i] + cr[i]
        M[i] += np.minimum(from_left, np.minimum(up, from_right))
    return M


def backtrack_min_seam(M: np.ndarray, axis: str = VERTICAL) -> SeamPath:
    """Walk up from the bottom-row minimum, leftmost on ties."""
    M = np.asarray(M, dtype=np.float64)
    h, w = M.shape
    coords = np.empty(h, dtype=np.intp)
    j = int(np.argmin(M[-1]))
    cost = float(M[-1, j])
    coords[-1] = j
    for i in range(h - 2, -1, -1):
        lo = max(j - 1, 0)
        j = lo + int(np.argmin(M[i, lo:min(j + 2, w)]))
        coords[i] = j
    return SeamPath(axis, coords, cost)


def remove_seam_array(data: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Drop one pixel per row of an (h, w, ...) array."""
    h, w = data.shape[:2]
    if w - 1 < 1:
        raise ValueError("cannot remove a seam from a single column")
    coords = np.asarray(coords)
    if coords.shape != (h,) or coords.min() < 0 or coords.max() >= w:
        raise ValueError("seam out of bounds")
    keep = np.ones((h, w), bool)
    keep[np.arange(h), coords] = False
    return data[keep].reshape((h, w - 1) + data.shape[2:])


def _to_vertical(data: np.ndarray, axis: str) -> np.ndarray:
    return data if axis == VERTICAL else np.swapaxes(data, 0, 1)


def remove_seam(img: RasterImage, seam: SeamPath) -> RasterImage:
    data = _to_vertical(img.data, seam.axis)
    if data.shape[1] - 1 < MIN_SIZE:
        raise ValueError("seam removal would go below the 2 px minimum")
    return RasterImage(_to_vertical(remove_seam_array(data, seam.coords), seam.axis))


def insert_seams_array(data: np.ndarray, seams: list[np.ndarray], average: bool = True) -> np.ndarray:
    """Duplicate each seam pixel; the copy is the average of the pixel and its
    right neighbour (``average=False`` repeats the pixel itself)."""
    h, w = data.shape[:2]
    counts = np.zeros((h, w), dtype=np.intp)
    for coords in seams:
        counts[np.arange(h), coords] += 1
    new_w = w + len(seams)
    out = np.empty((h, new_w) + data.shape[2:], dtype=data.dtype if not average else np.float64)
    if average:
        right = np.concatenate([data[:, 1:], data[:, -1:]], axis=1)
        fill = 0.5 * (data + right)
    else:
        fill = data
    for i in range(h):
        reps = counts[i] + 1
        src_idx = np.repeat(np.arange(w), reps)
        row = data[i][src_idx].astype(out.dtype)
        # each run starts with the original pixel; the rest of the run is inserted
        first = np.concatenate([[0], np.cumsum(reps)[:-1]])
        inserted = np.ones(new_w, bool)
        inserted[first] = False
        row[inserted] = fill[i][src_idx[inserted]]
        out[i] = row
    return out


def _energy(lum: np.ndarray, mode: str, extra: np.ndarray | None) -> np.ndarray:
    if mode == BACKWARD:
        return cumulative_backward(gradient_energy(lum, "L1") if extra is None else extra)
    if mode == FORWARD:
        return cumulative_forward(lum, extra)
    raise ValueError(f"unknown seam mode {mode!r}")


def find_seams(lum: np.ndarray, n: int, mode: str = BACKWARD, extra: np.ndarray | None = None) -> list[SeamPath]:
    """``n`` vertical seams found on one image.

    Each found seam's pixels are masked with a penalty exceeding the cost of
    any unmasked path, so later seams are disjoint from earlier ones whenever
    a disjoint 8-connected seam exists.
    """
    h, w = lum.shape
    if not 1 <= n <= w:
        raise ValueError(f"cannot find {n} seams in width {w}")
    if mode == BACKWARD:
        base = gradient_energy(lum, "L1") if extra is None else extra
    else:
        base = np.zeros((h, w)) if extra is None else extra
    # forward inserted-edge costs add at most 2 per row for unit-range luminance
    penalty = 1.0 + h * (np.abs(base).max() + 2.0 * max(np.ptp(lum), 1.0))
    mask = np.zeros((h, w), bool)
    seams = []
    for _ in range(n):
        e = np.where(mask, base + penalty, base)
        M = cumulative_backward(e) if mode == BACKWARD else cumulative_forward(lum, e)
        seam = backtrack_min_seam(M)
        seams.append(seam)
        mask[np.arange(h), seam.coords] = True
    return seams


def insert_seams(img: RasterImage, n: int, axis: str = VERTICAL, mode: str = BACKWARD,
                 P: np.ndarray | None = None) -> RasterImage:
    data = _to_vertical(img.data, axis)
    extra = None if P is None else _to_vertical(np.asarray(P, dtype=np.float64), axis)
    lum = to_luminance(RasterImage(data))
    seams = find_seams(lum, n, mode, extra)
    out = insert_seams_array(data, [s.coords for s in seams])
    return RasterImage(_to_vertical(out, axis))


@dataclass
class CarveResult:
    image: RasterImage
    removed: np.ndarray  # (h, w) bool, source pixels removed
    inserted: np.ndarray  # (h, w) bool, source pixels duplicated
    energy: np.ndarray | None = None


def _carve_axis(data, index, extra, target, mode, removed, inserted):
    """Carve vertical seams of the (h, w, c) ``data`` to ``target`` columns.

    ``index`` carries the flat source index of each pixel, ``extra`` the
    optional external energy map, both carved alongside.
    """
    c = data.shape[2]
    while data.shape[1] > target:
        stack = np.concatenate([data, index[..., None].astype(np.float64)]
                               + ([extra[..., None]] if extra is not None else []), axis=2)
        lum = to_luminance(RasterImage(data))
        seam = backtrack_min_seam(_energy(lum, mode, extra))
        removed.flat[index[np.arange(data.shape[0]), seam.coords]] = True
        stack = remove_seam_array(stack, seam.coords)
        data = stack[:, :, :c]
        index = stack[:, :, c].astype(np.intp)
        extra = stack[:, :, c + 1] if extra is not None else None
    while data.shape[1] < target:
        n = min(target - data.shape[1], data.shape[1])
        lum = to_luminance(RasterImage(data))
        seams = [s.coords for s in find_seams(lum, n, mode, extra)]
        for coords in seams:
            inserted.flat[index[np.arange(data.shape[0]), coords]] = True
        data = insert_seams_array(data, seams)
        # inserted pixels inherit the source index of the seam pixel they copy
        index = insert_seams_array(index, seams, average=False)
        if extra is not None:
            extra = insert_seams_array(extra[..., None], seams)[..., 0]
    return data, index, extra


def seam_retarget_result(img: RasterImage, target_w: int, target_h: int, mode: str = FORWARD,
                         energy_override: np.ndarray | None = None) -> CarveResult:
    if target_w < MIN_SIZE or target_h < MIN_SIZE:
        raise ValueError(f"target size must be at least {MIN_SIZE}x{MIN_SIZE}")
    if mode not in (BACKWARD, FORWARD):
        raise ValueError(f"unknown seam mode {mode!r}")
    h, w = img.shape
    extra = None
    if energy_override is not None:
        extra = check_field(energy_override, "energy override")
        if extra.shape != (h, w):
            raise ValueError(f"energy override {extra.shape[::-1]} does not match image {w}x{h}")
    removed = np.zeros((h, w), bool)
    inserted = np.zeros((h, w), bool)
    index = np.arange(h * w).reshape(h, w)
    data = np.array(img.data)

    data, index, extra = _carve_axis(data, index, extra, target_w, mode, removed, inserted)
    tx = lambda a: None if a is None else np.swapaxes(a, 0, 1)
    data, index, extra = _carve_axis(tx(data), tx(index), tx(extra), target_h, mode, removed, inserted)
    data, extra = tx(data), tx(extra)
    return CarveResult(RasterImage(np.clip(data, 0.0, 1.0)), removed, inserted, extra)


def seam_retarget(img: RasterImage, target_w: int, target_h: int, mode: str = FORWARD,
                  energy_override: np.ndarray | None = None) -> RasterImage:
    """Vertical seams to the target width first, then horizontal seams."""
    return seam_retarget_result(img, target_w, target_h, mode, energy_override).image
