import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from retarget import importance, mesh, regions, synthetic
from retarget.raster import RasterImage

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def corpus():
    return synthetic.corpus()


def uniform_classes(tri, value=0.5):
    """Single region with constant importance on a mesh's own rectangle."""
    w, h = int(tri.width), int(tri.height)
    seg = regions.RegionLabeling(np.zeros((h, w), np.intp), 1)
    M = np.full((h, w), value)
    seg, _ = regions.region_weight_map(seg, M)
    return mesh.classify_triangles(tri, seg, M)


def prepared(img: RasterImage, spacing=None, seed=0):
    """Importance, segmentation, mesh and classes for ``img`` at default settings."""
    maps = importance.compute_importance(img)
    seg = regions.segment_graph(img)
    seg, _ = regions.region_weight_map(seg, maps.M)
    tri = mesh.build_tri_mesh(img.width, img.height, spacing, seed=seed)
    return tri, mesh.classify_triangles(tri, seg, maps.M)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
