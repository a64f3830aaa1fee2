"""Small planar-geometry helpers shared by the mesh, warp and overlay code.

Continuous coordinates put the image rectangle at ``[0, w] x [0, h]`` with
pixel ``(row, col)`` centred at ``(col + 0.5, row + 0.5)``.
"""
from __future__ import annotations

import numpy as np

INSIDE_TOL = 1e-9


def signed_areas(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = points[triangles[:, 0]]
    b = points[triangles[:, 1]]
    c = points[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def triangle_pixels(tri: np.ndarray, width: int, height: int):
    """Pixels whose centres fall inside the triangle ``tri`` (3x2, inclusive).

    Returns ``(rows, cols, bary)`` where ``bary`` is (n, 3).
    """
    x0 = max(int(np.floor(tri[:, 0].min() - 0.5)), 0)
    x1 = min(int(np.ceil(tri[:, 0].max() - 0.5)), width - 1)
    y0 = max(int(np.floor(tri[:, 1].min() - 0.5)), 0)
    y1 = min(int(np.ceil(tri[:, 1].max() - 0.5)), height - 1)
    if x1 < x0 or y1 < y0:
        return np.zeros(0, np.intp), np.zeros(0, np.intp), np.zeros((0, 3))
    rows, cols = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    rows = rows.ravel()
    cols = cols.ravel()
    px = cols + 0.5
    py = rows + 0.5
    (ax, ay), (bx, by), (cx, cy) = tri
    det = (by - cy) * (ax - cx) + (cx - bx) * (ay - cy)
    l0 = ((by - cy) * (px - cx) + (cx - bx) * (py - cy)) / det
    l1 = ((cy - ay) * (px - cx) + (ax - cx) * (py - cy)) / det
    l2 = 1.0 - l0 - l1
    inside = (l0 >= -INSIDE_TOL) & (l1 >= -INSIDE_TOL) & (l2 >= -INSIDE_TOL)
    bary = np.stack([l0[inside], l1[inside], l2[inside]], axis=1)
    return rows[inside], cols[inside], bary


def line_pixels(x0: float, y0: float, x1: float, y1: float):
    """Integer pixel indices along a segment between two index-space points."""
    n = int(np.ceil(max(abs(x1 - x0), abs(y1 - y0)))) + 1
    t = np.linspace(0.0, 1.0, n)
    cols = np.floor(x0 + (x1 - x0) * t + 0.5).astype(np.intp)
    rows = np.floor(y0 + (y1 - y0) * t + 0.5).astype(np.intp)
    return rows, cols


def perpendicular_feet(pi: np.ndarray, pj: np.ndarray, pz: np.ndarray):
    """Orthogonal projection of ``pz`` onto the line through ``pi``/``pj``.

    Works row-wise on (n, 2) arrays. Returns ``(foot, length)``.
    """
    d = pj - pi
    t = np.einsum("ij,ij->i", pz - pi, d) / np.einsum("ij,ij->i", d, d)
    foot = pi + t[:, None] * d
    return foot, np.linalg.norm(pz - foot, axis=1)
