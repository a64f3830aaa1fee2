import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import fh_replay, same_partition
from retarget.raster import RasterImage
from retarget.regions import (RegionLabeling, SegmentationParams, compact_labels, grid_edges, region_weight_map,
                              render_regions, segment_graph, smooth_channels)


def half_split(h=8, w=8):
    img = np.zeros((h, w, 3))
    img[:, w // 2:] = 1.0
    return RasterImage(img)


def test_constant_image_is_one_region():
    seg = segment_graph(RasterImage(np.full((9, 7, 3), 0.3)), SegmentationParams(k=5, sigma=0.8, min_size=1))
    assert seg.region_count == 1


def test_half_split_gives_two_regions():
    seg = segment_graph(half_split(), SegmentationParams(k=0.1, sigma=0.0, min_size=1))
    assert seg.region_count == 2
    assert np.all(seg.labels[:, :4] == seg.labels[0, 0])
    assert np.all(seg.labels[:, 4:] == seg.labels[0, 7])


def test_huge_k_merges_everything(rng):
    seg = segment_graph(RasterImage(rng.random((8, 8, 3))), SegmentationParams(k=1e9, sigma=0.0, min_size=1))
    assert seg.region_count == 1


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([50.0, 150.0, 400.0, 1000.0]))
def test_partition_matches_replay(seed, k):
    rgb = np.random.default_rng(seed).random((8, 8, 3))
    seg = segment_graph(RasterImage(rgb), SegmentationParams(k=k, sigma=0.0, min_size=1))
    assert same_partition(seg.labels, fh_replay(rgb * 255.0, k))


@given(st.integers(0, 2 ** 32 - 1))
def test_partition_matches_replay_with_ties_and_min_size(seed):
    # quantized colours produce many equal edge weights
    rgb = np.random.default_rng(seed).integers(0, 3, (8, 8, 3)) / 2.0
    params = SegmentationParams(k=200.0, sigma=0.0, min_size=4)
    seg = segment_graph(RasterImage(rgb), params)
    assert same_partition(seg.labels, fh_replay(rgb * 255.0, 200.0, min_size=4))


def test_replay_with_smoothing(rng):
    img = RasterImage(rng.random((8, 8, 3)))
    params = SegmentationParams(k=300.0, sigma=0.5, min_size=1)
    seg = segment_graph(img, params)
    assert same_partition(seg.labels, fh_replay(smooth_channels(img, 0.5), 300.0))


def test_min_size_enforced(rng):
    img = RasterImage(rng.random((20, 20, 3)))
    seg = segment_graph(img, SegmentationParams(k=50.0, sigma=0.0, min_size=10))
    assert seg.sizes().min() >= 10


def test_labels_are_compact_and_raster_ordered(rng):
    seg = segment_graph(RasterImage(rng.random((12, 12, 3))), SegmentationParams(k=100.0, sigma=0.0, min_size=1))
    seen = []
    for v in seg.labels.ravel():
        if v not in seen:
            seen.append(v)
    assert seen == list(range(seg.region_count))


def test_regions_are_connected(rng):
    from scipy import ndimage
    seg = segment_graph(RasterImage(rng.random((16, 16, 3))), SegmentationParams(k=300.0, sigma=0.5, min_size=3))
    for r in range(seg.region_count):
        _, n = ndimage.label(seg.labels == r, structure=np.ones((3, 3)))
        assert n == 1


def test_grid_edges_count_and_order(rng):
    data = rng.random((4, 5, 3))
    src, dst, w = grid_edges(data)
    # right + down + two diagonals
    assert len(src) == 4 * 4 + 3 * 5 + 2 * 3 * 4
    assert np.all(src < dst)
    assert np.all(np.diff(w) >= 0)


def test_compact_labels():
    labels, n = compact_labels(np.array([7, 7, 3, 9, 3]), (5,))
    assert n == 3
    np.testing.assert_array_equal(labels, [0, 0, 1, 2, 1])


def test_params_validation():
    with pytest.raises(ValueError):
        SegmentationParams(k=0)
    with pytest.raises(ValueError):
        SegmentationParams(sigma=-1)
    assert SegmentationParams().resolved_min_size(600 * 400) == 240
    assert SegmentationParams().resolved_min_size(100) == 20


# --- region weights --------------------------------------------------------

def test_single_region_constant_weight():
    seg = RegionLabeling(np.zeros((3, 4), np.intp), 1)
    seg, MR = region_weight_map(seg, np.full((3, 4), 0.7))
    np.testing.assert_allclose(seg.weights, [0.7])
    np.testing.assert_allclose(MR, 0.7)


def test_two_pixel_region_mean():
    labels = np.array([[0, 0, 1], [1, 1, 1]])
    M = np.array([[0.2, 0.4, 0.0], [0.0, 0.0, 0.0]])
    seg, _ = region_weight_map(RegionLabeling(labels, 2), M)
    assert seg.weights[0] == pytest.approx(0.3)


@given(st.permutations(range(4)))
def test_relabeling_leaves_map_unchanged(perm):
    r = np.random.default_rng(1)
    labels = r.integers(0, 4, (6, 6))
    labels.flat[:4] = range(4)
    M = r.random((6, 6))
    _, a = region_weight_map(RegionLabeling(labels, 4), M)
    _, b = region_weight_map(RegionLabeling(np.array(perm)[labels], 4), M)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_weight_map_shape_mismatch():
    with pytest.raises(ValueError):
        region_weight_map(RegionLabeling(np.zeros((3, 3), np.intp), 1), np.zeros((3, 4)))


def test_render_regions_deterministic():
    seg = RegionLabeling(np.array([[0, 1], [1, 2]]), 3)
    a = render_regions(seg, seed=4)
    assert a == render_regions(seg, seed=4)
    assert a.channels == 3
