import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radiolith import hog as H

textures = arrays(np.float64, st.tuples(st.integers(16, 40), st.integers(16, 40)),
                  elements=st.integers(0, 255).map(lambda v: v / 255.0))


def test_constant_image_gives_zero_descriptor():
    d = H.hog(np.full((64, 64), 0.42))
    assert d.shape == (1764,)
    np.testing.assert_array_equal(d, 0.0)


@pytest.mark.parametrize("shape,spec,blocks", [
    ((64, 64), H.HogSpec(), (7, 7)),
    ((128, 64), H.HogSpec(), (15, 7)),
    # 8 x 11 cells of 6 px, 3-cell blocks at stride 2
    ((50, 70), H.HogSpec(cell_size=6, block_size=3, n_bins=6, block_stride=2), (3, 5)),
])
def test_descriptor_length(rng, shape, spec, blocks):
    expected = blocks[0] * blocks[1] * spec.block_size ** 2 * spec.n_bins
    assert spec.descriptor_length(shape) == expected
    assert H.hog(rng.random(shape), spec).shape == (expected,)


def test_too_small_and_invalid_spec():
    with pytest.raises(ValueError):
        H.hog(np.zeros((15, 40)))
    with pytest.raises(ValueError):
        H.HogSpec(cell_size=1)
    with pytest.raises(ValueError):
        H.HogSpec(n_bins=1)


@given(textures, st.floats(0.05, 20.0))
def test_intensity_scaling_invariance(img, a):
    if np.ptp(img) == 0:
        return
    np.testing.assert_allclose(H.hog(a * img), H.hog(img), atol=1e-6)


@given(textures, st.integers(0, 256))
def test_constant_offset_exact(img, k):
    # values k / 256 keep (a + c) - (b + c) == a - b exact
    dyadic = np.rint(img * 256) / 256
    np.testing.assert_array_equal(H.hog(dyadic + k / 256), H.hog(dyadic))


@given(textures)
def test_vote_split_conserves_mass(img):
    spec = H.HogSpec()
    cells = H.cell_histograms(img, spec)
    p = np.pad(img, 1, mode="edge")
    mag = np.hypot(p[1:-1, 2:] - p[1:-1, :-2], p[2:, 1:-1] - p[:-2, 1:-1])
    cy, cx = cells.shape[:2]
    for i in range(cy):
        for j in range(cx):
            want = mag[i * 8:(i + 1) * 8, j * 8:(j + 1) * 8].sum()
            assert abs(cells[i, j].sum() - want) < 1e-9
    assert np.all(cells >= 0)


@given(textures)
def test_block_norms_and_sign(img):
    spec = H.HogSpec()
    d = H.hog(img, spec).reshape(-1, spec.block_size ** 2 * spec.n_bins)
    assert np.all(d >= 0)
    assert np.all(np.linalg.norm(d, axis=1) <= 1 + 1e-6)
    assert np.all(d <= 1.0)


def test_single_orientation_votes():
    # a horizontal ramp has gradient angle 0, which sits half-way between
    # the last bin (centre 170 deg) and the first (centre 10 deg)
    img = np.tile(np.arange(32) / 64.0, (32, 1))
    cells = H.cell_histograms(img)
    interior = cells[1:-1, 1:-1]
    np.testing.assert_allclose(interior[..., 0], 8 * 8 * (2 / 64) / 2)
    np.testing.assert_allclose(interior[..., -1], interior[..., 0])
    np.testing.assert_array_equal(interior[..., 1:-1], 0.0)


@pytest.mark.parametrize("n_bins", [6, 18])
def test_quarter_turn_permutes_bins(rng, n_bins):
    spec = H.HogSpec(n_bins=n_bins)
    stripes = np.tile((np.arange(48) // 4 % 2).astype(np.float64), (64, 1)) * 0.5 + 0.25
    for img in (stripes, rng.random((64, 48))):
        cells = H.cell_histograms(img, spec)
        # np.rot90 turns gradients by -90 degrees: new bin b holds old bin b + n/2
        expected = np.roll(np.rot90(cells), -n_bins // 2, axis=-1)
        np.testing.assert_allclose(H.cell_histograms(np.rot90(img), spec), expected, atol=1e-12)
        np.testing.assert_allclose(H.hog(np.rot90(img), spec), H.normalize_blocks(expected, spec).ravel(),
                                   atol=1e-12)


def test_render_layout_and_strokes():
    spec = H.HogSpec()
    shape = (50, 70)
    assert H.hog_render(np.zeros(spec.descriptor_length(shape)), spec, shape).shape == (48, 64)
    np.testing.assert_array_equal(H.hog_render(np.zeros(spec.descriptor_length(shape)), spec, shape), 0.0)
    # every cell votes only for bin 4, whose centre is 90 degrees: vertical strokes
    _, _, by, bx = spec.grid(shape)
    blocks = np.zeros((by, bx, 2, 2, 9))
    blocks[..., 4] = 0.5
    out = H.hog_render(blocks.ravel(), spec, shape)
    first = out[:8, :8]
    assert first.max() == 1.0
    assert np.count_nonzero(first.any(axis=0)) == 1
    for i in range(6):
        for j in range(8):
            np.testing.assert_array_equal(out[i * 8:(i + 1) * 8, j * 8:(j + 1) * 8], first)


def test_csv_row(rng):
    d = H.hog(rng.random((32, 32)))
    back = np.array([float(v) for v in H.descriptor_to_csv(d).strip().split(",")])
    np.testing.assert_array_equal(back, d)
