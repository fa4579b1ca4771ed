from collections import deque
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radiolith import segmentation as S

from .conftest import piecewise_phantom, random_8bit

small_images = arrays(np.float64, st.tuples(st.integers(6, 20), st.integers(6, 20)),
                      elements=st.integers(0, 255).map(lambda v: v / 255.0))


def brute_force_otsu(bins):
    """Scan all 255 cuts with exact rationals; the first maximum wins."""
    total = sum(bins)
    best, best_cut = Fraction(-1), None
    for cut in range(1, 256):
        n0 = sum(bins[:cut])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            score = Fraction(0)
        else:
            mu0 = Fraction(sum(i * bins[i] for i in range(cut)), n0)
            mu1 = Fraction(sum(i * bins[i] for i in range(cut, 256)), n1)
            score = Fraction(n0, total) * Fraction(n1, total) * (mu0 - mu1) ** 2
        if score > best:
            best, best_cut = score, cut
    return best_cut, best


def bfs_components(mask, connectivity):
    h, w = mask.shape
    seen = np.zeros(mask.shape, dtype=bool)
    offs = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        offs += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    comps = []
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not seen[y, x]:
                seen[y, x] = True
                q, members = deque([(y, x)]), []
                while q:
                    a, b = q.popleft()
                    members.append((a, b))
                    for dy, dx in offs:
                        c, d = a + dy, b + dx
                        if 0 <= c < h and 0 <= d < w and mask[c, d] and not seen[c, d]:
                            seen[c, d] = True
                            q.append((c, d))
                comps.append(frozenset(members))
    return comps


def partition_of(labels):
    return {frozenset(zip(*np.nonzero(labels == v))) for v in np.unique(labels) if v > 0}


def is_4_connected(labels):
    for v in np.unique(labels):
        if len(bfs_components(labels == v, 4)) != 1:
            return False
    return True


def test_otsu_matches_brute_force_on_random_histograms():
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        kind = trial % 4
        if kind == 0:
            bins = rng.integers(0, 50, 256)
        elif kind == 1:
            bins = np.zeros(256, dtype=np.int64)
            bins[rng.choice(256, rng.integers(2, 6), replace=False)] = rng.integers(1, 20, 1)[0]
        elif kind == 2:
            bins = rng.poisson(3.0, 256) * (rng.random(256) < 0.3)
        else:
            half = rng.integers(0, 10, 128)
            bins = np.concatenate([half, half[::-1]])
        if np.count_nonzero(bins) < 2:
            bins[0], bins[255] = 1, 1
        res = S.otsu_from_histogram(bins)
        cut, score = brute_force_otsu([int(b) for b in bins])
        assert res.threshold == cut / 256 and res.level == cut - 1
        assert res.between_class_variance == pytest.approx(float(score) / 256 ** 2, rel=1e-12)


def test_otsu_cases():
    img = np.full((10, 10), 50 / 255)
    img[:, 5:] = 200 / 255
    res = S.otsu(img)
    assert 50 / 255 < res.threshold < 200 / 255
    np.testing.assert_array_equal(S.threshold(img, res.threshold), np.where(img > 0.5, 2, 1))
    # overlapping peaks, exactly mirrored about the boundary between bins 125 and 126
    i = np.arange(256)
    bins = np.rint(1000 * (np.exp(-(i - 50) ** 2 / 3200.0) + np.exp(-(i - 201) ** 2 / 3200.0))).astype(int)
    bins[252:] = 0
    np.testing.assert_array_equal(bins[:252], bins[:252][::-1])
    assert S.otsu_from_histogram(bins).level == 125
    with pytest.raises(ValueError):
        S.otsu(np.full((4, 4), 0.3))


def test_threshold_rules():
    img = np.full((4, 4), 0.2)
    img[:, 2:] = 0.8
    np.testing.assert_array_equal(S.threshold(img, 1.0), 1)
    np.testing.assert_array_equal(S.threshold(img, 0.5), np.where(img > 0.5, 2, 1))
    with pytest.raises(ValueError):
        S.threshold(img, 1.5)


def test_threshold_monotonicity_fixtures(rng):
    fixtures = [random_8bit(rng, (64, 64)) for _ in range(20)]
    fixtures += [piecewise_phantom(64), piecewise_phantom(128), np.tile(np.arange(256) / 255, (8, 1)),
                 np.full((16, 16), 120 / 255), np.eye(32)]
    for img in fixtures:
        hi = S.threshold(img, 150 / 255) == 2
        lo = S.threshold(img, 100 / 255) == 2
        assert not np.any(hi & ~lo)


@given(small_images, st.floats(0, 1), st.floats(0, 1))
def test_threshold_monotone_property(img, a, b):
    t1, t2 = sorted((a, b))
    assert not np.any((S.threshold(img, t2) == 2) & (S.threshold(img, t1) != 2))


def test_kmeans_basic(rng):
    img = np.full((8, 8), 0.2)
    img[4:] = 0.7
    np.testing.assert_array_equal(S.kmeans_intensity(img, 1), 1)
    for seed in range(10):
        np.testing.assert_array_equal(S.kmeans_intensity(img, 2, seed), np.where(img > 0.5, 2, 1))
    noisy = random_8bit(rng, (20, 20))
    np.testing.assert_array_equal(S.kmeans_intensity(noisy, 3, 5), S.kmeans_intensity(noisy, 3, 5))
    with pytest.raises(ValueError):
        S.kmeans_intensity(img, 3)


def test_kmeans_matches_best_contiguous_split(rng):
    # three separated groups: in 1-D the optimal 3-partition is contiguous
    vals = np.concatenate([rng.normal(0.15, 0.02, 40), rng.normal(0.5, 0.02, 30), rng.normal(0.85, 0.02, 50)])
    img = np.clip(vals, 0, 1).reshape(8, 15)
    got = S.kmeans_intensity(img, 3, seed=1)
    v = np.sort(img.ravel())
    best, cuts = np.inf, None
    for i in range(1, v.size - 1):
        for j in range(i + 1, v.size):
            sse = sum(((p - p.mean()) ** 2).sum() for p in (v[:i], v[i:j], v[j:]))
            if sse < best:
                best, cuts = sse, (v[i], v[j])
    want = 1 + (img >= cuts[0]).astype(int) + (img >= cuts[1]).astype(int)
    np.testing.assert_array_equal(got, want)


@given(small_images, st.integers(1, 4), st.integers(0, 100))
def test_kmeans_inertia_never_increases(img, k, seed):
    values, counts = np.unique(img, return_counts=True)
    if k > values.size:
        return
    centers, assign, history = S.kmeans_1d(values, counts, k, seed)
    assert np.all(np.diff(history) <= 1e-12)
    assert np.all(np.diff(centers) >= 0)


def two_basin(h=21, w=61):
    x = np.arange(w)
    g = np.minimum(np.abs(x - 15), np.abs(x - 45)) / 30.0
    return np.tile(g, (h, 1))


def test_watershed_two_basins():
    g = two_basin()
    markers = np.zeros(g.shape, dtype=np.int32)
    markers[:, 15] = 1
    markers[:, 45] = 2
    out = S.watershed(g, markers)
    assert S.n_labels(out) == 2
    assert np.all(out[:, :30] == 1) and np.all(out[:, 31:] == 2)
    assert np.all(out[markers > 0] == markers[markers > 0])
    np.testing.assert_array_equal(S.watershed(g, out), out)


def test_watershed_single_marker_and_errors(rng):
    g = rng.random((12, 9))
    m = np.zeros(g.shape, dtype=np.int32)
    m[3, 4] = 7
    np.testing.assert_array_equal(S.watershed(g, m), 7)
    with pytest.raises(ValueError):
        S.watershed(g, np.zeros(g.shape, dtype=np.int32))
    with pytest.raises(ValueError):
        S.watershed(g, np.zeros((3, 3), dtype=np.int32))


@given(small_images, st.integers(0, 2 ** 32 - 1))
def test_watershed_properties(g, seed):
    r = np.random.default_rng(seed)
    m = np.zeros(g.shape, dtype=np.int32)
    k = int(r.integers(1, 5))
    ys, xs = r.integers(0, g.shape[0], k), r.integers(0, g.shape[1], k)
    m[ys, xs] = np.arange(1, k + 1)
    out = S.watershed(g, m)
    assert np.all(out > 0)
    assert np.all(out[m > 0] == m[m > 0])
    np.testing.assert_array_equal(S.watershed(g, out), out)
    for v in np.unique(out):
        assert len(bfs_components(out == v, 8)) == 1


def test_auto_markers():
    np.testing.assert_array_equal(S.auto_markers(np.full((10, 10), 0.5)), 1)
    img = np.full((32, 64), 0.2)
    img[:, 20:40] = 0.2 + 0.6 * (np.arange(20) + 1) / 21
    img[:, 40:] = 0.8
    m = S.auto_markers(img, 10.0)
    assert S.n_labels(m) == 2
    for v in (1, 2):
        assert np.any(m == v)
    with pytest.raises(ValueError):
        S.auto_markers(img, 0.0)


def test_slic_constant_gives_grid_tiles():
    out = S.slic(np.full((64, 64), 0.5), S.SlicParams(n_segments=16))
    assert S.n_labels(out) == 16
    for v in range(1, 17):
        ys, xs = np.nonzero(out == v)
        assert ys.size == 256 and np.ptp(ys) == 15 and np.ptp(xs) == 15


@given(small_images, st.integers(1, 12), st.floats(0.01, 10.0))
def test_slic_partition_contract(img, n, m):
    out = S.slic(img, S.SlicParams(n_segments=n, compactness=m))
    k = S.n_labels(out)
    assert np.all(out > 0)
    assert set(np.unique(out)) == set(range(1, k + 1))
    assert 1 <= k <= 2 * n
    assert is_4_connected(out)


def test_slic_errors():
    with pytest.raises(ValueError):
        S.SlicParams(n_segments=0)
    with pytest.raises(ValueError):
        S.slic(np.zeros((3, 3)), S.SlicParams(n_segments=10))


def test_felzenszwalb_constant_and_halves():
    np.testing.assert_array_equal(S.felzenszwalb(np.full((20, 20), 0.4)), 1)
    img = np.full((32, 32), 0.1)
    img[:, 16:] = 0.9
    out = S.felzenszwalb(img, S.FelzParams(scale=0.1, sigma=0.5, min_size=100))
    assert S.n_labels(out) == 2
    assert partition_of(out) == partition_of(np.where(img > 0.5, 2, 1))


@given(small_images, st.floats(0.01, 5.0), st.integers(1, 30))
def test_felzenszwalb_min_size(img, k, min_size):
    out = S.felzenszwalb(img, S.FelzParams(scale=k, sigma=0.5, min_size=min_size))
    assert np.all(out > 0)
    sizes = np.bincount(out.ravel())[1:]
    assert np.all(sizes >= min(min_size, img.size))


def test_felzenszwalb_count_non_increasing_in_k():
    rng = np.random.default_rng(10)
    fixtures = [piecewise_phantom(48) + 0.03 * rng.random((48, 48)) for _ in range(5)]
    fixtures += [random_8bit(rng, (32, 32)) for _ in range(5)]
    for img in fixtures:
        counts = [S.n_labels(S.felzenszwalb(img, S.FelzParams(scale=k, sigma=0.8, min_size=5)))
                  for k in (0.05, 0.2, 1.0, 5.0, 50.0)]
        assert all(a >= b for a, b in zip(counts, counts[1:])), counts


def test_threshold_mask_apply(rng):
    img = rng.random((6, 7))
    np.testing.assert_array_equal(S.threshold_mask_apply(img, np.full(img.shape, 2), 2), img)
    np.testing.assert_array_equal(S.threshold_mask_apply(img, np.full(img.shape, 1), 2), 0.0)
    mask = S.threshold(img, 0.5)
    out = S.threshold_mask_apply(img, mask, 2)
    assert np.count_nonzero(out) == np.count_nonzero(mask == 2)
    with pytest.raises(ValueError):
        S.threshold_mask_apply(img, np.ones((2, 2)), 1)


@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))), st.sampled_from([4, 8]))
def test_connected_components_match_bfs(mask, conn):
    labels, n = S.connected_components(mask, conn)
    comps = bfs_components(mask, conn)
    assert n == len(comps)
    assert partition_of(labels) == set(comps)
    np.testing.assert_array_equal(labels == 0, ~mask)


def test_label_helpers():
    lab = np.array([[5, 5, 0], [9, 9, 5]])
    np.testing.assert_array_equal(S.relabel_sequential(lab), [[1, 1, 0], [2, 2, 1]])
    img = np.array([[0.2, 0.4, 0.0], [1.0, 0.5, 0.6]])
    assert S.label_stats(np.array([[1, 1, 2], [2, 2, 1]]), img) == [(1, 3, pytest.approx(0.4)),
                                                                    (2, 3, pytest.approx(0.5))]
    b = S.label_boundaries(np.array([[1, 1, 2], [1, 1, 2]]))
    np.testing.assert_array_equal(b, [[False, True, True], [False, True, True]])
