"""Independent reference implementations used as test oracles.

Everything here is written from the defining formulas with plain loops and
shares no code with the package beyond data containers.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


# --- seams ------------------------------------------------------------------

def all_vertical_seams(h: int, w: int) -> np.ndarray:
    """Every 8-connected top-to-bottom path as an (n, h) array of columns."""
    paths = [[j] for j in range(w)]
    for _ in range(h - 1):
        paths = [p + [p[-1] + d] for p in paths for d in (-1, 0, 1) if 0 <= p[-1] + d < w]
    return np.array(paths, dtype=np.intp)


def brute_backward_min(e: np.ndarray) -> float:
    h, w = e.shape
    paths = all_vertical_seams(h, w)
    return float(e[np.arange(h), paths].sum(axis=1).min())


def _absdiff(lum, a, b):
    """|I(a) - I(b)|, zero when either pixel lies outside the image."""
    h, w = lum.shape
    (i0, j0), (i1, j1) = a, b
    if not (0 <= i0 < h and 0 <= j0 < w and 0 <= i1 < h and 0 <= j1 < w):
        return 0.0
    return abs(lum[i0, j0] - lum[i1, j1])


def forward_path_cost(lum: np.ndarray, path, P=None) -> float:
    """Total inserted-edge cost of removing ``path``.

    Row 0 pays only ``P``; every later row pays the neighbour-join term plus
    the case term that depends on where the path came from.
    """
    h, w = lum.shape
    total = 0.0 if P is None else float(P[0, path[0]])
    for i in range(1, h):
        j, jp = path[i], path[i - 1]
        c_up = _absdiff(lum, (i, j + 1), (i, j - 1))
        if jp == j - 1:
            case = _absdiff(lum, (i - 1, j), (i, j - 1))
        elif jp == j + 1:
            case = _absdiff(lum, (i - 1, j), (i, j + 1))
        else:
            case = 0.0
        total += c_up + case + (0.0 if P is None else float(P[i, j]))
    return total


def brute_forward_min(lum: np.ndarray, P=None) -> float:
    h, w = lum.shape
    return min(forward_path_cost(lum, p, P) for p in all_vertical_seams(h, w))


# --- segmentation -----------------------------------------------------------

def fh_replay(rgb255: np.ndarray, k: float, min_size: int = 1) -> np.ndarray:
    """Felzenszwalb-Huttenlocher on an 8-connected grid, with explicit member sets.

    ``rgb255`` is (h, w, 3) on the 0..255 scale, already smoothed.
    Returns a per-pixel component id (arbitrary numbering).
    """
    h, w, _ = rgb255.shape
    edges = []
    for r in range(h):
        for c in range(w):
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                r2, c2 = r + dr, c + dc
                if 0 <= r2 < h and 0 <= c2 < w:
                    a, b = r * w + c, r2 * w + c2
                    d = rgb255[r, c] - rgb255[r2, c2]
                    wt = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
                    edges.append((wt, min(a, b), max(a, b)))
    edges.sort()
    comp = {i: i for i in range(h * w)}
    members = {i: {i} for i in range(h * w)}
    internal = {i: 0.0 for i in range(h * w)}
    for wt, a, b in edges:
        ca, cb = comp[a], comp[b]
        if ca == cb:
            continue
        if wt <= internal[ca] + k / len(members[ca]) and wt <= internal[cb] + k / len(members[cb]):
            internal[ca] = max(internal[ca], internal[cb], wt)
            for p in members[cb]:
                comp[p] = ca
            members[ca] |= members.pop(cb)
            del internal[cb]
    if min_size > 1:
        for wt, a, b in edges:
            ca, cb = comp[a], comp[b]
            if ca != cb and (len(members[ca]) < min_size or len(members[cb]) < min_size):
                for p in members[cb]:
                    comp[p] = ca
                members[ca] |= members.pop(cb)
    return np.array([comp[i] for i in range(h * w)]).reshape(h, w)


def same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    """True when two labelings induce the same set partition of pixels."""
    a, b = a.ravel(), b.ravel()
    fwd, back = {}, {}
    for x, y in zip(a.tolist(), b.tolist()):
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


# --- importance -------------------------------------------------------------

def aleph(f: np.ndarray) -> np.ndarray:
    lo, hi = float(f.min()), float(f.max())
    if hi == lo:
        return np.zeros_like(f, dtype=np.float64)
    return (f - lo) / (hi - lo)


def combine_straight(G, E_mod, W, H, gamma):
    return aleph(aleph(G) * aleph(E_mod) + aleph(W) + gamma * aleph(H))


# --- mesh energies -----------------------------------------------------------

def _perp(c, i, j, z):
    ci, cj, cz = c[i], c[j], c[z]
    d = cj - ci
    t = np.dot(cz - ci, d) / np.dot(d, d)
    foot = ci + t * d
    return foot, float(np.linalg.norm(cz - foot))


def energy_terms_loop(c, cp, triangles, theta_u, tri_weight, region_of, region_weights, tau):
    """E1, E2, E3 evaluated term by term with Python loops."""
    E1 = E2 = E3 = 0.0
    seen = set()
    for q, tri in enumerate(triangles):
        for e in range(3):
            z = tri[e]
            i, j = tri[(e + 1) % 3], tri[(e + 2) % 3]
            d = c[i] - c[j]
            dp = cp[i] - cp[j]
            E1 += tri_weight[q] * float(np.sum((dp - theta_u[q] * d) ** 2))
            _, p = _perp(c, i, j, z)
            _, pp = _perp(cp, i, j, z)
            wr = region_weights[region_of[q]]
            E3 += wr * (float(np.sum((dp - (pp / p) * d) ** 2)) + tau * float(np.sum((dp - d) ** 2)))
            key = (min(i, j), max(i, j))
            if key not in seen:
                seen.add(key)
                ratio = np.linalg.norm(dp) / np.linalg.norm(d)
                E2 += float(np.sum((dp - ratio * d) ** 2))
    return E1, E2, E3


def theta_loop(c, cp, triangles):
    out = []
    for tri in triangles:
        num = den = 0.0
        for a, b in itertools.combinations(tri, 2):
            d, dp = c[a] - c[b], cp[a] - cp[b]
            num += float(np.dot(d, dp))
            den += float(np.dot(d, d))
        out.append(num / den)
    return np.array(out)
