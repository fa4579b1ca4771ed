import hashlib
import json
import shutil
import subprocess

import numpy as np
import pytest

from radiolith import edges, overlay, segmentation
from radiolith.blobs import Blob, blobs_from_csv
from radiolith.cli import main
from radiolith.io import load_image, load_label_map, quantize, save_image

from .conftest import gaussian_blob, piecewise_phantom


@pytest.fixture
def image(tmp_path):
    path = tmp_path / "in.pgm"
    save_image(piecewise_phantom(64), path)
    return path


def write_pipeline(tmp_path, stages, **glob):
    body = {"version": 1, "stages": stages}
    if glob:
        body["global"] = glob
    path = tmp_path / "p.json"
    path.write_text(json.dumps(body))
    return path


def digest(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(folder.iterdir())}


def test_op_sobel_writes_magnitude(tmp_path, image):
    out = tmp_path / "grad.pgm"
    assert main(["op", "sobel", "-i", str(image), "-o", str(out)]) == 0
    mag = edges.gradient(load_image(image), "sobel").magnitude
    np.testing.assert_array_equal(load_image(out), quantize(mag / mag.max()) / 255)


def test_op_otsu_prints_level(capsys, image):
    assert main(["op", "otsu", "-i", str(image)]) == 0
    level = int(capsys.readouterr().out.strip())
    assert level == segmentation.otsu(load_image(image)).level
    assert 0 <= level <= 255


def test_op_blobs_log_csv(tmp_path, capsys):
    src = tmp_path / "blob.pgm"
    save_image(gaussian_blob(4.0), src)
    out = tmp_path / "blobs.csv"
    assert main(["op", "blobs-log", "-i", str(src), "--t-min", "2", "--t-max", "64",
                 "--threshold", "0.1", "-o", str(out)]) == 0
    text = out.read_text()
    assert text.splitlines()[0] == "x,y,radius,scale,response,polarity"
    found = blobs_from_csv(text)
    assert [(b.x, b.y) for b in found] == [(64.0, 64.0)]
    # without -o the same CSV goes to standard output
    assert main(["op", "blobs_log", "-i", str(src), "--t-min", "2", "--t-max", "64", "--threshold", "0.1"]) == 0
    assert capsys.readouterr().out == text


def test_op_label_artifact(tmp_path, image):
    out = tmp_path / "lab.pgm"
    assert main(["op", "slic", "-i", str(image), "--n-segments", "9", "-o", str(out)]) == 0
    labels = load_label_map(out)
    assert labels.min() >= 1 and labels.shape == (64, 64)
    assert main(["op", "kmeans", "-i", str(image), "--k", "2", "--seed", "4", "-o", str(out)]) == 0
    assert set(np.unique(load_label_map(out))) == {1, 2}


@pytest.mark.parametrize("argv", [
    ["op", "frobnicate"],
    ["op", "sobel"],
    ["op", "median-blur", "-i", "x.pgm", "--radius", "0"],
    ["op", "canny", "-i", "x.pgm", "--low", "0.5", "--high", "0.1"],
    ["unknown-command"],
])
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_runtime_errors_exit_1(tmp_path, image):
    assert main(["op", "sobel", "-i", str(tmp_path / "missing.pgm"), "-o", str(tmp_path / "x.pgm")]) == 1
    assert main(["op", "crop", "-i", str(image), "--x", "60", "--width", "10", "--height", "2",
                 "-o", str(tmp_path / "c.pgm")]) == 1
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P5\n2 2\n255\n\x00")
    assert main(["op", "sobel", "-i", str(bad)]) == 1


def test_run_validate_and_exit_codes(tmp_path, image, capsys):
    spec = write_pipeline(tmp_path, [{"op": "median_blur"}, {"op": "canny_otsu", "save_as": "edges"}], seed=5)
    assert main(["validate", str(spec)]) == 0
    assert capsys.readouterr().out.startswith("ok: 2 stage(s)")
    out = tmp_path / "out"
    assert main(["run", str(spec), "-i", str(image), "-o", str(out)]) == 0
    assert {"final.pgm", "report.json", "edges.pgm"} <= set(digest(out))
    broken = tmp_path / "broken.json"
    broken.write_text('{"version": 1, "stages": [{"op": "frobnicate"}]}')
    assert main(["validate", str(broken)]) == 2
    assert main(["run", str(broken), "-i", str(image), "-o", str(tmp_path / "o2")]) == 2
    assert "unknown operation at stage 0" in capsys.readouterr().err
    failing = write_pipeline(tmp_path, [{"op": "crop", "params": {"x": 70, "width": 4, "height": 4}}])
    assert main(["run", str(failing), "-i", str(image), "-o", str(tmp_path / "o3")]) == 1
    assert json.loads((tmp_path / "o3" / "report.json").read_text())["status"] == "failed"


def test_run_deterministic_across_threads_and_backends(tmp_path, image):
    spec = write_pipeline(tmp_path, [
        {"op": "add_salt_pepper", "params": {"p": 0.03}},
        {"op": "median_blur"},
        {"op": "bilateral", "params": {"sigma_spatial": 2.0, "sigma_range": 0.2}},
        {"op": "watershed"},
        {"op": "felzenszwalb", "params": {"min_size": 10}},
        {"op": "blobs_dog", "params": {"t_min": 2, "t_max": 32, "n_scales": 8}},
    ], seed=9)
    runs = []
    for i, extra in enumerate((["--threads", "1"], ["--threads", "8"], ["--threads", "8"])):
        out = tmp_path / f"r{i}"
        assert main(["run", str(spec), "-i", str(image), "-o", str(out)] + extra) == 0
        runs.append(digest(out))
    assert runs[0] == runs[1] == runs[2]
    py = tmp_path / "py"
    assert main(["--backend", "python", "run", str(spec), "-i", str(image), "-o", str(py)]) == 0
    assert digest(py) == runs[0]


def test_ops_listing(capsys):
    assert main(["ops"]) == 0
    out = capsys.readouterr().out
    for name in ("median-blur", "blobs-log", "watershed", "hog"):
        assert name in out


@pytest.mark.skipif(shutil.which("radiolith") is None, reason="console script not installed")
def test_console_script(tmp_path, image):
    done = subprocess.run(["radiolith", "op", "otsu", "-i", str(image)], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.strip().isdigit()
    done = subprocess.run(["radiolith", "op", "nope"], capture_output=True, text=True)
    assert done.returncode == 2


def test_overlay_empty_edges_is_gray_rgb(rng):
    img = rng.random((10, 12))
    out = overlay.overlay_edges(img, np.zeros((10, 12), bool))
    np.testing.assert_array_equal(out, np.stack([img] * 3, axis=-1))


def test_overlay_edges_paints_mask(rng):
    img = rng.random((8, 8))
    mask = np.zeros((8, 8), bool)
    mask[3, 2:6] = True
    out = overlay.overlay_edges(img, mask)
    np.testing.assert_array_equal(out[mask], np.tile(overlay.EDGE_COLOR, (4, 1)))
    np.testing.assert_array_equal(out[~mask][:, 0], img[~mask])


def test_overlay_blob_circle():
    img = np.zeros((21, 21))
    out = overlay.overlay_blobs(img, [Blob(10.0, 10.0, 4.5, 1.0, "dark")])  # r = sqrt(9) = 3
    painted = np.all(out == overlay.BLOB_COLOR, axis=-1)
    ys, xs = np.nonzero(painted)
    for ang in np.linspace(0, 2 * np.pi, 48, endpoint=False):
        # every direction meets a painted pixel within one pixel of the ideal point
        px, py = 10 + 3 * np.cos(ang), 10 + 3 * np.sin(ang)
        assert np.min(np.hypot(xs - px, ys - py)) <= 1.0
    assert not painted[10, 10]
    assert not painted[10, 15] and not painted[10, 5]
    assert np.all(np.abs(np.hypot(xs - 10, ys - 10) - 3) < 0.5)


def test_overlay_label_boundaries(rng):
    labels = rng.integers(1, 4, (9, 11))
    out = overlay.overlay_labels(np.zeros((9, 11)), labels)
    painted = np.all(out == overlay.BOUNDARY_COLOR, axis=-1)
    expected = np.zeros_like(painted)
    for y in range(9):
        for x in range(11):
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                yy, xx = y + dy, x + dx
                if 0 <= yy < 9 and 0 <= xx < 11 and labels[yy, xx] != labels[y, x]:
                    expected[y, x] = True
    np.testing.assert_array_equal(painted, expected)


def test_overlay_shape_mismatch():
    with pytest.raises(ValueError):
        overlay.overlay_edges(np.zeros((4, 4)), np.zeros((5, 4), bool))
