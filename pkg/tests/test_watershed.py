import math

import numpy as np
import pytest

import oracles
from stochws.exceptions import ConfigError, DataError
from stochws.watershed import (
    hierarchical_volume_ws,
    impose_minima,
    marker_components,
    marker_watershed,
    regional_minima,
    volume_extinctions,
)


def _minima_sets(labels):
    return {frozenset(zip(*np.nonzero(labels == k))) for k in range(1, labels.max() + 1)}


def _as_int_sets(sets):
    return {frozenset((int(a), int(b)) for a, b in s) for s in sets}


def test_regional_minima_examples():
    assert (regional_minima(np.full((4, 5), 2.0)) == 1).all()
    ramp = np.add.outer(np.arange(5.0), np.arange(6.0))
    m = regional_minima(ramp)
    assert m.max() == 1 and m[0, 0] == 1 and m.sum() == 1
    pits = np.ones((7, 9))
    pits[3, 2] = pits[3, 6] = 0.0
    m = regional_minima(pits)
    assert m.max() == 2 and m[3, 2] == 1 and m[3, 6] == 2 and m.sum() == 3


def test_regional_minima_match_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        f = rng.integers(0, 4, rng.integers(1, 10, 2)).astype(float)
        got = _as_int_sets(_minima_sets(regional_minima(f)))
        assert got == _as_int_sets(oracles.regional_minima(f))


def test_impose_minima_examples():
    rng = np.random.default_rng(1)
    for _ in range(30):
        f = rng.random((10, 12))
        mins = regional_minima(f)
        assert _minima_sets(regional_minima(impose_minima(f, mins))) == _minima_sets(mins)
        single = np.zeros_like(mins)
        single[rng.integers(10), rng.integers(12)] = 1
        assert regional_minima(impose_minima(f, single)).max() == 1
        m = np.zeros((10, 12), dtype=int)
        m.ravel()[rng.choice(120, 3, replace=False)] = [1, 2, 3]
        out = impose_minima(f, m)
        got = _as_int_sets(oracles.regional_minima(out))
        # adjacent markers share the imposed level and fuse into one minimum
        want = _as_int_sets(_minima_sets(oracles.components(m > 0, 8)[0]))
        assert got == want
    with pytest.raises(DataError):
        impose_minima(np.zeros((2, 2)), np.zeros((2, 2), dtype=int))


def test_one_marker_one_region():
    f = np.random.default_rng(2).random((8, 8))
    m = np.zeros((8, 8), dtype=int)
    m[3, 4] = 7
    seg = marker_watershed(f, m)
    assert seg.region_count == 1 and not seg.contours.any()


def test_symmetric_two_pits_vertical_line():
    ii, jj = np.mgrid[0:11, 0:11]
    f = np.minimum(np.hypot(ii - 5, jj - 2), np.hypot(ii - 5, jj - 8))
    m = np.zeros((11, 11), dtype=int)
    m[5, 2] = 1
    m[5, 8] = 2
    seg = marker_watershed(f, m)
    assert seg.contours[:, 5].all() and seg.contours.sum() == 11
    assert (seg.regions[:, :5] == 1).all() and (seg.regions[:, 6:] == 2).all()
    np.testing.assert_array_equal(seg.regions, oracles.meyer_flood(f, m))


def test_flood_matches_python_oracle():
    rng = np.random.default_rng(3)
    for it in range(150):
        h, w = rng.integers(2, 12, 2)
        f = rng.integers(0, 5, (h, w)).astype(float) if it % 2 else rng.random((h, w))
        m = np.zeros((h, w), dtype=int)
        k = int(rng.integers(1, min(5, h * w) + 1))
        m.ravel()[rng.choice(h * w, k, replace=False)] = rng.integers(1, 4, k)
        comps = marker_components(m)
        np.testing.assert_array_equal(marker_watershed(f, m).regions, oracles.meyer_flood(f, comps))


def test_adjacent_markers_do_not_seal_pixels():
    f = np.array([[2.0, 1.0, 0.0], [0.0, 3.0, 3.0], [1.0, 3.0, 1.0]])
    m = np.array([[2, 1, 3], [0, 0, 0], [0, 0, 0]])
    regions = marker_watershed(f, m).regions
    for i, j in zip(*np.nonzero(regions == 0)):
        nb = regions[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
        assert len(set(nb[nb > 0].tolist())) >= 2
    assert regions.max() == 3


def test_marker_components_split_and_number():
    m = np.array([[1, 1, 0, 1], [0, 0, 0, 1], [2, 1, 0, 0]])
    comps = marker_components(m)
    assert comps.max() == 4
    assert comps[0, 0] == comps[0, 1] == 1 and comps[0, 3] == comps[1, 3] == 2
    assert comps[2, 0] != comps[2, 1]


def test_marker_watershed_errors():
    with pytest.raises(DataError):
        marker_watershed(np.zeros((3, 3)), np.zeros((3, 3), dtype=int))
    with pytest.raises(DataError):
        marker_watershed(np.zeros((3, 3)), np.ones((2, 2), dtype=int))
    with pytest.raises(DataError):
        marker_watershed(np.full((2, 2), np.nan), np.ones((2, 2), dtype=int))


# --------------------------------------------------------------------------
# volume extinction


def test_single_minimum_survives():
    tree = volume_extinctions(np.full((4, 4), 1.0))
    assert tree.n_minima == 1 and tree.extinction.tolist() == [math.inf]


def test_row_profile_hand_integrated():
    f = np.array([[9.0, 1, 4, 2, 2, 7, 0, 0, 8]])
    tree = volume_extinctions(f)
    assert tree.n_minima == 3
    # level 4: {1} (volume 3) meets {2, 2} (volume 4); level 7: 19 vs 14
    assert tree.extinction.tolist() == [3.0, math.inf, 14.0]
    assert tree.absorbed_by.tolist() == [2, 0, 2]
    assert tree.merge_level[[0, 2]].tolist() == [4.0, 7.0]
    assert tree.ranking().tolist() == [2, 3, 1]


def test_identical_pits_tie_to_lower_label():
    for f in (np.array([[5.0, 0, 5, 0, 5]]), np.array([[5.0, 0, 5, 0, 5]])[:, ::-1]):
        tree = volume_extinctions(f)
        assert tree.extinction.tolist() == [math.inf, 5.0]


def test_extinction_matches_level_oracle():
    rng = np.random.default_rng(4)
    for _ in range(40):
        f = rng.random(tuple(rng.integers(2, 9, 2)))
        tree = volume_extinctions(f)
        minima, ext = oracles.volume_extinctions_by_levels(f)
        assert tree.n_minima == len(minima)
        for k, s in enumerate(minima, 1):
            i, j = next(iter(s))
            lab = tree.minima[i, j]
            assert lab == k  # both number minima in raster order
            if math.isinf(ext[k]):
                assert math.isinf(tree.extinction[k - 1])
            else:
                assert tree.extinction[k - 1] == pytest.approx(ext[k], rel=1e-9, abs=1e-12)
        assert np.isinf(tree.extinction).sum() == 1


def test_hierarchical_all_minima_equals_unconstrained():
    rng = np.random.default_rng(5)
    for _ in range(20):
        f = rng.random((9, 9))
        tree = volume_extinctions(f)
        seg = hierarchical_volume_ws(f, tree.n_minima)
        ref = oracles.meyer_flood(f, regional_minima(f))
        np.testing.assert_array_equal(seg.regions, ref)


def test_hierarchical_region_count_and_errors():
    f = np.random.default_rng(6).random((12, 12))
    n = volume_extinctions(f).n_minima
    for R in (1, 2, n):
        assert hierarchical_volume_ws(f, R).region_count == R
    with pytest.raises(ConfigError):
        hierarchical_volume_ws(f, n + 1)
    with pytest.raises(ConfigError):
        hierarchical_volume_ws(f, 0)
