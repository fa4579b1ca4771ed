import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radiolith.io import (ImageFormatError, encode_label_map, load_image, load_label_map, quantize,
                          save_ascii_pgm, save_image)


def test_p5_bytes_scale_to_unit_interval(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    img = load_image(p)
    assert img.shape == (2, 2)
    np.testing.assert_array_equal(img.ravel(), [0.0, 1.0, 128 / 255, 64 / 255])


def test_header_comments_and_plain_formats(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P2\n# comment\n3 1 # trailing\n255\n0 10 # mid\n255\n")
    np.testing.assert_array_equal(load_image(p), [[0.0, 10 / 255, 1.0]])
    q = tmp_path / "c.ppm"
    q.write_bytes(b"P3 1 1 255 255 0 0\n")
    np.testing.assert_array_equal(load_image(q), [[[1.0, 0.0, 0.0]]])


def test_quantize_rounding():
    assert quantize(np.array([1.0]))[0] == 255
    assert quantize(np.array([0.5]))[0] == 128
    assert quantize(np.array([-0.2, 1.7])).tolist() == [0, 255]


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_gray_round_trip(tmp_path, rng, suffix):
    img = rng.integers(0, 256, (17, 23)) / 255.0
    path = tmp_path / ("g" + suffix)
    save_image(img, path)
    np.testing.assert_array_equal(load_image(path), img)


@pytest.mark.parametrize("suffix", [".ppm", ".png"])
def test_rgb_round_trip(tmp_path, rng, suffix):
    img = rng.integers(0, 256, (9, 5, 3)) / 255.0
    path = tmp_path / ("c" + suffix)
    save_image(img, path)
    np.testing.assert_array_equal(load_image(path), img)


def test_ascii_pgm(tmp_path, rng):
    img = rng.integers(0, 256, (4, 6)) / 255.0
    save_ascii_pgm(img, tmp_path / "a.pgm")
    np.testing.assert_array_equal(load_image(tmp_path / "a.pgm"), img)


@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
              elements=st.floats(0.0, 1.0)))
def test_round_trip_equals_quantization(tmp_path_factory, img):
    path = tmp_path_factory.mktemp("rt") / "x.pgm"
    save_image(img, path)
    np.testing.assert_array_equal(load_image(path), quantize(img) / 255.0)


@pytest.mark.parametrize("data", [
    b"P4\n1 1\n\x00",
    b"P5\n2 2\n65535\n" + bytes(8),
    b"P5\n2 2\n255\n" + bytes(3),
    b"P5\n0 2\n255\n",
    b"P5\n2",
    b"hello",
])
def test_malformed_files_raise(tmp_path, data):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(ImageFormatError):
        load_image(p)


def test_missing_file(tmp_path):
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "nope.pgm")


@pytest.mark.parametrize("top", [7, 255, 300, 65535])
def test_label_map_round_trip(tmp_path, rng, top):
    lab = rng.integers(0, top + 1, (6, 7)).astype(np.int32)
    lab[0, 0] = top
    (tmp_path / "l.pgm").write_bytes(encode_label_map(lab))
    np.testing.assert_array_equal(load_label_map(tmp_path / "l.pgm"), lab)
