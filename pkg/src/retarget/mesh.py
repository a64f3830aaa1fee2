"""Jittered Delaunay triangle mesh over the image rectangle and the triangle
classes that drive the deformation energies."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .geometry import signed_areas, triangle_pixels

MIN_AREA = 1e-9

INTERIOR, LEFT, RIGHT, TOP, BOTTOM = "interior", "left", "right", "top", "bottom"
CORNERS = ("corner-tl", "corner-tr", "corner-bl", "corner-br")


class MeshError(RuntimeError):
    pass


def default_spacing(width: int, height: int) -> int:
    return max(12, int(round(min(width, height) / 25)))


def border_tag(x: float, y: float, width: float, height: float) -> str:
    on_l, on_r = x == 0.0, x == width
    on_t, on_b = y == 0.0, y == height
    if (on_l or on_r) and (on_t or on_b):
        return "corner-" + ("t" if on_t else "b") + ("l" if on_l else "r")
    if on_l:
        return LEFT
    if on_r:
        return RIGHT
    if on_t:
        return TOP
    if on_b:
        return BOTTOM
    return INTERIOR


@dataclass
class TriMesh:
    vertices: np.ndarray  # (V, 2) float, (x, y)
    triangles: np.ndarray  # (T, 3) int, counter-clockwise in (x, y)
    width: float
    height: float
    boundary_tags: list = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.intp)
        if not self.boundary_tags:
            self.boundary_tags = [border_tag(x, y, self.width, self.height) for x, y in self.vertices]

    @classmethod
    def from_points(cls, points, width: float, height: float) -> "TriMesh":
        """Delaunay-triangulate ``points`` (which must include the four corners)."""
        points = np.asarray(points, dtype=np.float64)
        tris = Delaunay(points).simplices.astype(np.intp)
        areas = signed_areas(points, tris)
        tris[areas < 0] = tris[areas < 0][:, [0, 2, 1]]
        return cls(points, tris, float(width), float(height))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self, points=None) -> np.ndarray:
        return signed_areas(self.vertices if points is None else points, self.triangles)

    @cached_property
    def tri_edges(self) -> np.ndarray:
        """(T, 3, 2) vertex pairs; edge ``e`` of a triangle is opposite vertex ``e``."""
        t = self.triangles
        return np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)

    @cached_property
    def edges(self) -> np.ndarray:
        e = np.sort(self.tri_edges.reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def tri_adjacency(self) -> np.ndarray:
        """(P, 2) pairs of triangle indices sharing an edge, each pair once."""
        e = np.sort(self.tri_edges.reshape(-1, 2), axis=1)
        owner = np.repeat(np.arange(self.n_triangles), 3)
        order = np.lexsort((owner, e[:, 1], e[:, 0]))
        e, owner = e[order], owner[order]
        same = np.all(e[1:] == e[:-1], axis=1)
        return np.stack([owner[:-1][same], owner[1:][same]], axis=1)

    def tag_mask(self, *tags) -> np.ndarray:
        return np.array([t in tags for t in self.boundary_tags])


def build_tri_mesh(width: int, height: int, spacing: float | None = None, jitter: float = 0.15,
                   seed: int = 0) -> TriMesh:
    """Structured lattice, randomly perturbed, then Delaunay-triangulated.

    Border points only slide along their border line; corners stay fixed.
    """
    if spacing is None:
        spacing = default_spacing(width, height)
    if spacing < 4:
        raise ValueError("spacing must be >= 4")
    if not 0 <= jitter <= 0.3:
        raise ValueError("jitter must lie in [0, 0.3]")
    if width < 2 * spacing or height < 2 * spacing:
        raise ValueError("image must span at least two mesh cells per axis")
    nx = max(2, int(round(width / spacing)))
    ny = max(2, int(round(height / spacing)))
    sx, sy = width / nx, height / ny
    gx, gy = np.meshgrid(np.arange(nx + 1) * sx, np.arange(ny + 1) * sy)
    # exact border coordinates
    gx[:, -1] = width
    gy[-1, :] = height
    base = np.stack([gx.ravel(), gy.ravel()], axis=1)
    tags = [border_tag(x, y, width, height) for x, y in base]
    free_x = np.array([t in (INTERIOR, TOP, BOTTOM) for t in tags])
    free_y = np.array([t in (INTERIOR, LEFT, RIGHT) for t in tags])
    unit = np.random.default_rng(seed).uniform(-1.0, 1.0, size=base.shape)

    j = jitter
    for _ in range(4):
        pts = base.copy()
        pts[free_x, 0] += unit[free_x, 0] * j * sx
        pts[free_y, 1] += unit[free_y, 1] * j * sy
        mesh = TriMesh.from_points(pts, width, height)
        mesh.boundary_tags = list(tags)
        if np.all(mesh.areas() > MIN_AREA):
            total = mesh.areas().sum()
            if abs(total - width * height) <= 1e-6 * width * height:
                return mesh
        j *= 0.5
    raise MeshError("degenerate triangulation after 3 retries")


# --- triangle classification ----------------------------------------------

@dataclass
class TriangleClasses:
    region_of: np.ndarray  # (T,) region id per triangle
    qualified: np.ndarray  # (T,) bool, every covered pixel clears mu * w_region
    straddling: np.ndarray  # (T,) bool, covers >= 2 region labels
    tri_weight: np.ndarray  # (T,) mean importance over covered pixels
    region_weights: np.ndarray  # (N_R,) per-region mean importance
    feature_regions: list  # per triangle: frozenset of region ids whose feature set holds it
    covered: np.ndarray  # (T,) covered pixel count

    @property
    def feature(self) -> np.ndarray:
        return self.qualified | self.straddling

    def region_sets(self) -> dict:
        out = {}
        for q, r in enumerate(self.region_of):
            out.setdefault(int(r), []).append(q)
        return out

    def per_region_edges(self, mesh: TriMesh) -> dict:
        out = {}
        for r, tris in self.region_sets().items():
            e = np.sort(mesh.tri_edges[tris].reshape(-1, 2), axis=1)
            out[r] = np.unique(e, axis=0)
        return out


def classify_triangles(mesh: TriMesh, seg, M: np.ndarray, mu: float = 0.9,
                       quantifier: str = "all") -> TriangleClasses:
    """Assign each triangle a region, a weight and its feature status.

    ``seg`` must carry region weights. ``quantifier="any"`` relaxes the
    threshold test from every covered pixel to at least one.
    """
    if quantifier not in ("all", "any"):
        raise ValueError("quantifier must be 'all' or 'any'")
    if seg.weights is None:
        raise ValueError("segmentation has no region weights")
    h, w = M.shape
    if seg.shape != M.shape or (mesh.width, mesh.height) != (w, h):
        raise ValueError("mesh, labels and importance map dimensions disagree")
    labels = seg.labels
    T = mesh.n_triangles
    region_of = np.zeros(T, np.intp)
    qualified = np.zeros(T, bool)
    straddling = np.zeros(T, bool)
    weight = np.zeros(T)
    covered = np.zeros(T, np.intp)
    fregions = [frozenset()] * T
    for q, tri in enumerate(mesh.triangles):
        rows, cols, _ = triangle_pixels(mesh.vertices[tri], w, h)
        covered[q] = rows.size
        if rows.size == 0:
            continue
        lab = labels[rows, cols]
        vals = M[rows, cols]
        present, counts = np.unique(lab, return_counts=True)
        r = int(present[np.argmax(counts)])  # np.unique sorts, so ties go to the lowest id
        region_of[q] = r
        weight[q] = vals.mean()
        clears = vals >= mu * seg.weights[r]
        qualified[q] = clears.all() if quantifier == "all" else clears.any()
        straddling[q] = present.size >= 2
        members = set(int(p) for p in present) if straddling[q] else set()
        if qualified[q]:
            members.add(r)
        fregions[q] = frozenset(members)

    empty = np.nonzero(covered == 0)[0]
    if empty.size:
        full = np.nonzero(covered > 0)[0]
        if full.size == 0:
            raise ValueError("no triangle covers a pixel centre")
        centroids = mesh.vertices[mesh.triangles].mean(axis=1)
        _, nearest = cKDTree(centroids[full]).query(centroids[empty])
        src = full[nearest]
        region_of[empty] = region_of[src]
        weight[empty] = weight[src]
        qualified[empty] = qualified[src]
        straddling[empty] = straddling[src]
        for e, s in zip(empty, src):
            fregions[e] = fregions[s]
    return TriangleClasses(region_of=region_of, qualified=qualified, straddling=straddling,
                           tri_weight=weight, region_weights=np.asarray(seg.weights, float),
                           feature_regions=fregions, covered=covered)


# --- text dump ---------------------------------------------------------------

def dump_mesh(path, vertices: np.ndarray, triangles: np.ndarray) -> None:
    with open(path, "w") as fh:
        for x, y in vertices:
            fh.write(f"v {x:.6f} {y:.6f}\n")
        for a, b, c in triangles:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def load_mesh(path):
    verts, tris = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append((float(parts[1]), float(parts[2])))
            elif parts[0] == "f":
                tris.append(tuple(int(p) - 1 for p in parts[1:4]))
    return np.array(verts, dtype=np.float64), np.array(tris, dtype=np.intp)
