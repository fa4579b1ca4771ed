import hashlib
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radiolith import pipeline as P
from radiolith.io import load_image, load_label_map, quantize, save_image
from radiolith.kernels import BorderPolicy

from .conftest import piecewise_phantom


def spec_of(*stages, **glob):
    body = {"version": 1, "stages": list(stages)}
    if glob:
        body["global"] = glob
    return P.pipeline_from_dict(body)


def tree_digest(path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(path.iterdir())}


@pytest.fixture
def phantom_file(tmp_path):
    path = tmp_path / "in.pgm"
    save_image(piecewise_phantom(64), path)
    return path


def test_parse_examples():
    spec = P.parse_pipeline_text('{"version":1,"stages":[]}')
    assert spec.stages == ()
    spec = P.parse_pipeline_text('{"version":1,"stages":[{"op":"median_blur","params":{"radius":5}}]}')
    assert spec.stages[0].op == "median_blur" and spec.stages[0].params == {"radius": 5}
    assert P.REGISTRY["median_blur"].run is P._op_median
    with pytest.raises(P.PipelineError, match="unknown operation at stage 0"):
        P.parse_pipeline_text('{"version":1,"stages":[{"op":"frobnicate"}]}')


@pytest.mark.parametrize("text,fragment", [
    ('{"version":1,\n "stages": [}', "line 2"),
    ('{"version":2,"stages":[]}', "version"),
    ('{"version":1,"stages":[],"extra":1}', "unknown key 'extra'"),
    ('{"version":1,"stages":[{"op":"median_blur","params":{"radius":0}}]}', "at stage 0"),
    ('{"version":1,"stages":[{"op":"sobel"},{"op":"median_blur","params":{"radius":"3"}}]}', "at stage 1"),
    ('{"version":1,"stages":[{"op":"median_blur","params":{"size":3}}]}', "unknown parameter 'size'"),
    ('{"version":1,"stages":[{"op":"median_blur","colour":1}]}', "unknown key 'colour' at stage 0"),
    ('{"version":1,"stages":[{"op":"crop","params":{"width":4}}]}', "missing required parameter 'height'"),
    ('{"version":1,"stages":[{"op":"canny","params":{"low":0.5,"high":0.1}}]}', "at stage 0"),
    ('{"version":1,"stages":[{"op":"erode","params":{"size":4}}]}', "at stage 0"),
    ('{"version":1,"stages":[{"op":"blobs_log","params":{"t_min":8,"t_max":2}}]}', "at stage 0"),
    ('{"version":1,"stages":[{"op":"kernel_edges","params":{"family":"gabor","gamma":2}}]}', "at stage 0"),
    ('{"version":1,"stages":[{"op":"sobel","save_as":"a"},{"op":"sobel","save_as":"a"}]}', "duplicate"),
    ('{"version":1,"stages":[{"op":"sobel","save_as":"../x"}]}', "invalid save_as"),
    ('{"version":1,"stages":[],"global":{"border_policy":"wrap"}}', "border_policy"),
    ('{"version":1,"stages":[],"global":{"seed":-1}}', "seed"),
    ('{"version":1,"stages":[{"op":"threshold","params":{"t":300}}]}', "at stage 0"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(P.PipelineError, match=fragment):
        P.parse_pipeline_text(text)


def test_param_coercion():
    assert P.validate_params("median_blur", {"radius": 2.0}) == {"radius": 2}
    with pytest.raises(ValueError):
        P.validate_params("median_blur", {"radius": 2.5})
    with pytest.raises(ValueError):
        P.validate_params("median_blur", {"radius": True})
    with pytest.raises(ValueError):
        P.validate_params("sobel", {"normalize": 1})
    with pytest.raises(ValueError):
        P.validate_params("gaussian_blur", {"sigma": float("nan")})


def test_empty_pipeline_copies_input(tmp_path, rng):
    img = rng.random((9, 13))
    save_image(img, tmp_path / "in.pgm")
    report = P.run_pipeline(spec_of(), tmp_path / "in.pgm", tmp_path / "out")
    np.testing.assert_array_equal(load_image(tmp_path / "out" / "final.pgm"), quantize(img) / 255)
    assert report.stages == []
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["final.pgm", "report.json"]


def test_salt_pepper_then_median_restores(tmp_path, phantom_file):
    save_image(piecewise_phantom(256), phantom_file)
    spec = spec_of({"op": "add_salt_pepper", "params": {"p": 0.05, "seed": 7}},
                   {"op": "median_blur", "params": {"radius": 1}})
    P.run_pipeline(spec, phantom_file, tmp_path / "out")
    final = load_image(tmp_path / "out" / "final.pgm")
    assert np.mean(np.abs(final - piecewise_phantom(256)) <= 1 / 255 + 1e-12) >= 0.99


FULL = [
    {"op": "add_salt_pepper", "params": {"p": 0.02}},
    {"op": "median_blur", "save_as": "clean"},
    {"op": "blobs_log", "params": {"t_min": 2, "t_max": 32, "n_scales": 8}},
    {"op": "slic", "params": {"n_segments": 12}},
    {"op": "watershed"},
    {"op": "hog"},
    {"op": "canny_otsu"},
]


def test_report_and_side_files(tmp_path, phantom_file):
    spec = spec_of(*FULL, seed=3)
    report = P.run_pipeline(spec, phantom_file, tmp_path / "out")
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    assert [s["op"] for s in data["stages"]] == [s["op"] for s in FULL]
    assert data["seed"] == 3 and data["status"] == "ok"
    assert data["pipeline_sha256"] == hashlib.sha256(spec.canonical().encode()).hexdigest()
    assert all(s["ms"] is None for s in data["stages"])
    out = tmp_path / "out"
    assert (out / "clean.pgm").exists()
    assert data["stages"][2]["outputs"] == ["stage02_blobs_log.csv", "stage02_blobs_log_overlay.ppm"]
    labels = load_label_map(out / "stage03_slic_labels.pgm")
    assert labels.shape == (64, 64) and labels.min() >= 1
    assert (out / "stage05_hog.csv").read_text().count(",") == 7 * 7 * 36 - 1
    for s in data["stages"]:
        assert {"min", "max", "mean"} <= set(s["stats"])
        for name in s["outputs"]:
            assert (out / name).exists()
    assert report.to_dict() == data
    timed = P.run_pipeline(spec, phantom_file, tmp_path / "timed", timings=True)
    assert all(s.ms is not None and s.ms >= 0 for s in timed.stages)


def test_determinism_across_threads_and_runs(tmp_path, phantom_file):
    spec = spec_of(*FULL, seed=11)
    digests = []
    for i, threads in enumerate((1, 8, 1)):
        P.run_pipeline(spec, phantom_file, tmp_path / f"o{i}", threads=threads)
        digests.append(tree_digest(tmp_path / f"o{i}"))
    assert digests[0] == digests[1] == digests[2]
    P.run_pipeline(spec, phantom_file, tmp_path / "other", seed=12)
    assert tree_digest(tmp_path / "other") != digests[0]


def test_failure_writes_partial_report(tmp_path, phantom_file):
    spec = spec_of({"op": "median_blur"}, {"op": "crop", "params": {"x": 60, "width": 10, "height": 4}})
    with pytest.raises(P.PipelineRunError) as info:
        P.run_pipeline(spec, phantom_file, tmp_path / "out")
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    assert data["status"] == "failed" and data["failed_stage"] == 1
    assert [s["op"] for s in data["stages"]] == ["median_blur"]
    assert info.value.report.failed_stage == 1


def _value_for(name, schema, draw):
    if schema.choices is not None:
        return draw(st.sampled_from(schema.choices))
    if schema.kind is bool:
        return draw(st.booleans())
    if schema.kind is int:
        lo = int(schema.low) if schema.low is not None else 0
        return draw(st.integers(lo, lo + 6))
    lo = schema.low if schema.low is not None else -10.0
    hi = min(schema.high, lo + 10.0) if schema.high is not None else lo + 10.0
    return draw(st.floats(lo, hi, allow_nan=False))


# failures that depend on the image rather than on the parameters
DATA_ERRORS = ("crop window", "smaller than one", "exceeds the pixel count", "distinct intensities",
               "degenerate")


@pytest.mark.parametrize("op_name", sorted(P.REGISTRY))
@given(data=st.data())
def test_validation_completeness(op_name, data):
    """Anything that validates runs, apart from errors about the image itself."""
    op = P.REGISTRY[op_name]
    raw = {}
    for name, schema in op.params.items():
        if schema.default is P._REQUIRED or data.draw(st.booleans()):
            raw[name] = _value_for(name, schema, data.draw)
    try:
        params = P.validate_params(op_name, raw)
    except ValueError:
        return
    img = piecewise_phantom(32) + 0.01 * np.random.default_rng(0).random((32, 32))
    env = P.Env(0, BorderPolicy.parse("reflect"))
    try:
        result = P.run_stage(op_name, img, params, env)
    except ValueError as exc:
        assert any(f in str(exc) for f in DATA_ERRORS), f"{op_name} {params}: {exc}"
        return
    assert np.all(np.isfinite(result.image))
