import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from oracles import all_vertical_seams, brute_backward_min, brute_forward_min, forward_path_cost
from retarget.raster import RasterImage, gradient_energy, to_luminance
from retarget.seam import (SeamPath, backtrack_min_seam, cumulative_backward, cumulative_forward, find_seams,
                           insert_seams, insert_seams_array, remove_seam, remove_seam_array, seam_retarget,
                           seam_retarget_result)

WORKED_CUMULATIVE = np.array([
    [30, 20, 18, 16, 20, 15],
    [35, 25, 22, 25, 22, 27],
    [40, 30, 28, 25, 26, 32],
    [46, 35, 30, 33, 32, 36],
    [50, 38, 32, 35, 36, 42],
    [54, 42, 48, 38, 40, 45],
], dtype=float)

dyadic = st.integers(0, 64).map(lambda v: v / 16.0)


# --- cumulative maps -----------------------------------------------------------

def test_backward_zero_and_hand_rows():
    assert not cumulative_backward(np.zeros((4, 5))).any()
    M = cumulative_backward(np.array([[1, 2, 3], [4, 5, 6]], float))
    np.testing.assert_array_equal(M, [[1, 2, 3], [5, 6, 8]])


@given(hnp.arrays(np.float64, (6, 8), elements=dyadic))
def test_backward_min_matches_enumeration(e):
    assert cumulative_backward(e)[-1].min() == brute_backward_min(e)


def test_forward_constant_luminance_reduces_to_backward(rng):
    P = rng.random((5, 7))
    np.testing.assert_array_equal(cumulative_forward(np.full((5, 7), 0.4), P), cumulative_backward(P))
    assert not cumulative_forward(np.full((5, 7), 0.4)).any()


@given(hnp.arrays(np.float64, (5, 6), elements=dyadic))
def test_forward_min_matches_enumeration(lum):
    assert cumulative_forward(lum)[-1].min() == brute_forward_min(lum)


@given(hnp.arrays(np.float64, (4, 5), elements=dyadic), hnp.arrays(np.float64, (4, 5), elements=dyadic))
def test_forward_with_extra_energy_matches_enumeration(lum, P):
    assert cumulative_forward(lum, P)[-1].min() == brute_forward_min(lum, P)


def test_forward_shape_mismatch():
    with pytest.raises(ValueError):
        cumulative_forward(np.zeros((3, 3)), np.zeros((3, 4)))


# --- backtracking --------------------------------------------------------------

def test_worked_cumulative_seam():
    seam = backtrack_min_seam(WORKED_CUMULATIVE)
    assert seam.cost == 38
    assert seam.coords[::-1].tolist() == [3, 2, 2, 3, 2, 3]


def test_ties_go_left():
    assert backtrack_min_seam(np.ones((5, 4))).coords.tolist() == [0] * 5
    assert backtrack_min_seam(np.arange(4.0)[:, None]).coords.tolist() == [0] * 4


@given(hnp.arrays(np.float64, (5, 6), elements=dyadic))
def test_backtracked_seam_realises_minimum(e):
    seam = backtrack_min_seam(cumulative_backward(e))
    assert e[np.arange(5), seam.coords].sum() == seam.cost == brute_backward_min(e)


@given(hnp.arrays(np.float64, (5, 6), elements=dyadic))
def test_forward_backtrack_realises_minimum(lum):
    seam = backtrack_min_seam(cumulative_forward(lum))
    assert forward_path_cost(lum, seam.coords) == seam.cost


def test_seam_path_must_be_connected():
    with pytest.raises(ValueError):
        SeamPath("vertical", np.array([0, 2, 1]), 0.0)


def test_enumeration_counts():
    # three starts; edge columns have two moves, the middle one three
    assert len(all_vertical_seams(2, 3)) == 7
    assert len(all_vertical_seams(6, 8)) > 1000


# --- removal --------------------------------------------------------------------

def test_remove_middle_of_row():
    out = remove_seam_array(np.array([[1.0, 2.0, 3.0]]), np.array([1]))
    np.testing.assert_array_equal(out, [[1.0, 3.0]])


@given(st.integers(0, 10 ** 6))
def test_removal_keeps_other_pixels(seed):
    r = np.random.default_rng(seed)
    data = r.random((6, 7, 3))
    seam = backtrack_min_seam(cumulative_backward(r.random((6, 7))))
    out = remove_seam_array(data, seam.coords)
    for i in range(6):
        np.testing.assert_array_equal(out[i], np.delete(data[i], seam.coords[i], axis=0))


def test_removal_floor(rng):
    img = RasterImage(rng.random((4, 6, 3)))
    for _ in range(4):
        lum = to_luminance(img)
        img = remove_seam(img, backtrack_min_seam(cumulative_backward(gradient_energy(lum))))
    assert img.width == 2
    with pytest.raises(ValueError):
        remove_seam(img, SeamPath("vertical", np.zeros(4, int), 0.0))


def test_horizontal_removal(rng):
    img = RasterImage(rng.random((5, 4, 3)))
    out = remove_seam(img, SeamPath("horizontal", np.array([1, 2, 2, 3]), 0.0))
    assert out.shape == (4, 4)
    np.testing.assert_array_equal(out.data[:, 0], np.delete(img.data[:, 0], 1, axis=0))


# --- insertion -------------------------------------------------------------------

def test_insert_constant_image():
    img = RasterImage(np.full((6, 6, 3), 0.3))
    out = insert_seams(img, 4)
    assert out.shape == (6, 10)
    np.testing.assert_allclose(out.data, 0.3)


def test_inserted_seam_lands_in_flat_area():
    lum = np.zeros((8, 10))
    lum[:, 6:] = np.random.default_rng(0).random((8, 4))
    (seam,) = find_seams(lum, 1)
    energy = gradient_energy(lum)
    assert energy[np.arange(8), seam.coords].sum() == 0
    assert np.all(seam.coords < 5)


def test_insertion_averages_with_right_neighbour():
    data = np.array([[0.0, 1.0, 0.5]])
    out = insert_seams_array(data, [np.array([0])])
    np.testing.assert_allclose(out, [[0.0, 0.5, 1.0, 0.5]])
    out = insert_seams_array(data, [np.array([2])])
    np.testing.assert_allclose(out, [[0.0, 1.0, 0.5, 0.5]])


def test_found_seams_are_disjoint(rng):
    lum = rng.random((10, 12))
    seams = find_seams(lum, 6, "forward")
    taken = np.zeros((10, 12), int)
    for s in seams:
        taken[np.arange(10), s.coords] += 1
    assert taken.max() == 1


@given(st.integers(1, 8))
def test_insert_then_remove_restores_size(n):
    img = RasterImage(np.random.default_rng(n).random((6, 8, 3)))
    grown = insert_seams(img, n, mode="forward")
    assert grown.shape == (6, 8 + n)
    assert seam_retarget(grown, 8, 6).shape == (6, 8)


# --- driver ------------------------------------------------------------------------

def test_same_size_is_unchanged(rng):
    img = RasterImage(rng.random((7, 9, 3)))
    assert seam_retarget(img, 9, 7) == img


def test_zero_energy_column_removed_first():
    # strictly convex ramp, with column 5 duplicating column 4: only column 4
    # then has a zero forward difference
    data = np.tile(np.linspace(0.0, 1.0, 9) ** 2, (8, 1))
    data[:, 5] = data[:, 4]
    data[::2, 8] = 0.9  # vertical variation keeps the last column off zero
    img = RasterImage(data)
    e = gradient_energy(to_luminance(img))
    assert np.all(e[:, 4] == 0) and np.all(np.delete(e, 4, axis=1).sum(axis=0) > 0)
    res = seam_retarget_result(img, 8, 8, "backward")
    assert res.removed[:, 4].all() and res.removed.sum() == 8


@pytest.mark.parametrize("mode", ["backward", "forward"])
def test_target_dimensions_exact(mode, corpus):
    img = corpus["stripes"]
    for tw, th in ((48, 60), (80, 36), (100, 70), (50, 75)):
        out = seam_retarget(img, tw, th, mode)
        assert out.shape == (th, tw)


def test_energy_override_steers_removal(rng):
    img = RasterImage(rng.random((6, 8, 3)))
    P = np.ones((6, 8))
    P[:, 2] = 0.0
    res = seam_retarget_result(img, 7, 6, "backward", energy_override=P)
    assert res.removed[:, 2].all()
    with pytest.raises(ValueError):
        seam_retarget_result(img, 7, 6, "backward", energy_override=np.ones((5, 8)))


def test_masks_track_source_pixels(corpus):
    img = corpus["blobs"]
    res = seam_retarget_result(img, 70, 80, "forward")
    assert res.removed.sum() == (96 - 70) * 64
    assert res.inserted.any()
    assert res.image.shape == (80, 70)


def test_invalid_requests(rng):
    img = RasterImage(rng.random((6, 6)))
    with pytest.raises(ValueError):
        seam_retarget(img, 1, 6)
    with pytest.raises(ValueError):
        seam_retarget(img, 5, 6, "sideways")
