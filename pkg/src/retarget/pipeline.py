"""End-to-end retargeting: mesh warping and the seam / scaling baselines."""
from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import importance, mesh as meshmod, regions, seam, solver, warp
from .raster import RasterImage, decode_image, encode_image, field_to_image, resample_bilinear, to_luminance

log = logging.getLogger(__name__)

METHODS = ("mesh", "seam-backward", "seam-forward", "scale")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2


class PipelineError(RuntimeError):
    pass


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"[{name}] {exc}") from exc


def resolve_dimension(request, source: int) -> int:
    """``"50%"`` -> rounded half up against ``source``; plain integers pass through."""
    s = str(request).strip()
    if s.endswith("%"):
        value = int(np.floor(source * float(s[:-1]) / 100.0 + 0.5))
    else:
        value = int(s)
    if value < 2:
        raise ValueError(f"target dimension {request!r} resolves to {value} px (< 2)")
    return value


@dataclass
class RunConfig:
    input: Path
    output: Path
    width: str = "100%"
    height: str = "100%"
    method: str = "mesh"
    alpha: float = 1.2
    beta: float = 1.5
    gamma: float = 2.0
    seg_k: float = 1000.0
    seg_sigma: float = 0.5
    seg_min_size: int | None = None
    mu: float = 0.9
    tau: float = 0.4
    eps_t: float = 0.02
    eps_p: float = 0.05
    mesh_spacing: float | None = None
    mesh_jitter: float = 0.15
    seed: int = 0
    vertex_tol: float = 0.5
    factor_tol: float = 0.1
    debug_dir: Path | None = None
    energy_map: Path | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    def importance_params(self):
        return importance.ImportanceParams(self.alpha, self.beta, self.gamma)

    def segmentation_params(self):
        return regions.SegmentationParams(self.seg_k, self.seg_sigma, self.seg_min_size)

    def solver_params(self):
        return solver.SolverParams(tau=self.tau, eps_t=self.eps_t, eps_p=self.eps_p,
                                   vertex_tol=self.vertex_tol, factor_tol=self.factor_tol)


@dataclass
class MeshResult:
    image: RasterImage
    maps: importance.ImportanceMaps
    segmentation: regions.RegionLabeling
    region_map: np.ndarray
    mesh: meshmod.TriMesh
    classes: meshmod.TriangleClasses
    state: solver.DeformState
    artifacts: dict = field(default_factory=dict)


def retarget_mesh(img: RasterImage, target_w: int, target_h: int, config: RunConfig,
                  keep_iterates: bool = False) -> MeshResult:
    with stage("importance"):
        maps = importance.compute_importance(img, config.importance_params())
    with stage("regions"):
        seg = regions.segment_graph(img, config.segmentation_params())
        seg, region_map = regions.region_weight_map(seg, maps.M)
    with stage("mesh"):
        tri = meshmod.build_tri_mesh(img.width, img.height, config.mesh_spacing, config.mesh_jitter, config.seed)
        classes = meshmod.classify_triangles(tri, seg, maps.M, config.mu)
    with stage("solver"):
        state = solver.solve_retarget_mesh(tri, classes, target_w, target_h, config.solver_params(),
                                           keep_iterates=keep_iterates)
    with stage("warp"):
        out = warp.warp_render(img, tri.vertices, tri.triangles, state.c_prime, target_w, target_h)
    return MeshResult(out, maps, seg, region_map, tri, classes, state)


def _write_mesh_debug(result: MeshResult, src: RasterImage, debug: Path, stem: str) -> None:
    m = result.maps
    for key, f in (("g", m.G), ("e", m.E_mod), ("w", m.W), ("h", m.H), ("m", m.M)):
        # W and E can exceed 1; emit them rescaled so the PNG shows their structure
        encode_image(field_to_image(importance.normalize_unit(f) if key in ("e", "w") else f),
                     debug / f"{stem}.{key}.png")
    encode_image(regions.render_regions(result.segmentation, seed=0), debug / f"{stem}.seg.png")
    encode_image(field_to_image(result.region_map), debug / f"{stem}.mr.png")
    tri = result.mesh
    encode_image(warp.mesh_overlay(src, tri.vertices, tri.triangles), debug / f"{stem}.mesh_initial.png")
    encode_image(warp.mesh_overlay(result.image, result.state.c_prime, tri.triangles),
                 debug / f"{stem}.mesh_final.png")
    meshmod.dump_mesh(debug / f"{stem}.mesh_initial.obj", tri.vertices, tri.triangles)
    meshmod.dump_mesh(debug / f"{stem}.mesh_final.obj", result.state.c_prime, tri.triangles)
    solver.write_trace(debug / f"{stem}.trace.txt", result.state)


def run_pipeline(config: RunConfig) -> int:
    """Run one retargeting job; returns the process exit status."""
    try:
        with stage("input"):
            img = decode_image(config.input)
            tw = resolve_dimension(config.width, img.width)
            th = resolve_dimension(config.height, img.height)
        debug = Path(config.debug_dir) if config.debug_dir else None
        if debug:
            debug.mkdir(parents=True, exist_ok=True)
        stem = Path(config.input).stem
        status = EXIT_OK

        if config.method == "scale":
            with stage("scale"):
                out = resample_bilinear(img, tw, th)
        elif config.method.startswith("seam-"):
            override = None
            if config.energy_map is not None:
                with stage("input"):
                    override = to_luminance(decode_image(config.energy_map))
            with stage("seam"):
                res = seam.seam_retarget_result(img, tw, th, config.method.split("-", 1)[1], override)
            out = res.image
            if debug:
                overlay = warp.mask_overlay(img, res.removed | res.inserted)
                encode_image(overlay, debug / f"{stem}.seams.png")
        else:
            result = retarget_mesh(img, tw, th, config)
            out = result.image
            if debug:
                _write_mesh_debug(result, img, debug, stem)
            if not result.state.converged:
                status = EXIT_NOT_CONVERGED
        with stage("output"):
            encode_image(out, config.output)
        return status
    except PipelineError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
