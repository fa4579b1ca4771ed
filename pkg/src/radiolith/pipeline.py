"""Declarative JSON pipelines: parsing, validation and execution.

A pipeline file looks like::

    {"version": 1,
     "global": {"seed": 7, "border_policy": "reflect"},
     "stages": [{"op": "add_salt_pepper", "params": {"p": 0.05}},
                {"op": "median_blur", "params": {"radius": 1}, "save_as": "clean"}]}

Stages pass one "current image" along. Ops whose result is not an image
(blobs, labels, descriptors) write side files and hand the image on
unchanged. Every parameter is checked before the first stage runs, so a
spec that validates can only fail later on data problems.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import _backend, blobs, denoise, edges, morphology, overlay, raster, segmentation
from .hog import HogSpec, descriptor_to_csv, hog_render
from .hog import hog as hog_descriptor
from .io import encode_label_map, encode_netpbm, load_image
from .kernels import MIN_WIDTH, BorderPolicy, pseudo_voigt_mix

SCHEMA_VERSION = 1
_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")
_REQUIRED = object()


class PipelineError(ValueError):
    """A pipeline file that cannot be parsed or fails validation."""


class PipelineRunError(RuntimeError):
    """A stage failed while running; ``report`` holds the partial report."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


# -- parameter schemas -------------------------------------------------------

@dataclass(frozen=True)
class Param:
    kind: type  # int, float, bool or str
    default: Any = _REQUIRED
    low: float | None = None
    high: float | None = None
    low_open: bool = False
    high_open: bool = False
    choices: tuple | None = None
    help: str = ""

    def coerce(self, name, value):
        if value is None and self.default is None:
            return None
        if self.kind is bool:
            if not isinstance(value, bool):
                raise ValueError(f"parameter {name!r} must be a boolean")
            return value
        if isinstance(value, bool):
            raise ValueError(f"parameter {name!r} must be {self.kind.__name__}, got a boolean")
        if self.kind is int:
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            if not isinstance(value, int):
                raise ValueError(f"parameter {name!r} must be an integer")
        elif self.kind is float:
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"parameter {name!r} must be a finite number")
            value = float(value)
        elif self.kind is str:
            if not isinstance(value, str):
                raise ValueError(f"parameter {name!r} must be a string")
        if self.choices is not None and value not in self.choices:
            raise ValueError(f"parameter {name!r} must be one of {list(self.choices)}, got {value!r}")
        if self.low is not None and (value < self.low or (self.low_open and value == self.low)):
            raise ValueError(f"parameter {name!r} must be {'>' if self.low_open else '>='} {self.low}, got {value}")
        if self.high is not None and (value > self.high or (self.high_open and value == self.high)):
            raise ValueError(f"parameter {name!r} must be {'<' if self.high_open else '<='} {self.high}, got {value}")
        return value


def _pos(default=_REQUIRED, **kw):
    return Param(float, default, low=0.0, low_open=True, **kw)


def _nonneg(default=_REQUIRED, **kw):
    return Param(float, default, low=0.0, **kw)


def _width(default=_REQUIRED, **kw):
    return Param(float, default, low=MIN_WIDTH, **kw)


def _check_sigma_or_zero(p):
    if 0 < p["sigma"] < MIN_WIDTH:
        raise ValueError(f"parameter 'sigma' must be 0 or >= {MIN_WIDTH:g}, got {p['sigma']}")


def _int(default=_REQUIRED, low=1, **kw):
    return Param(int, default, low=low, **kw)


@dataclass
class StageResult:
    image: np.ndarray
    stats: dict = field(default_factory=dict)
    csv: str | None = None
    labels: np.ndarray | None = None
    overlay: np.ndarray | None = None
    render: np.ndarray | None = None


@dataclass(frozen=True)
class Env:
    seed: int
    border: BorderPolicy


@dataclass(frozen=True)
class Operation:
    name: str
    run: Callable[[np.ndarray, dict, Env], StageResult]
    params: dict
    check: Callable[[dict], None] | None = None
    artifact: str = "image"  # what the single-op command writes with -o
    summary: str = ""


REGISTRY: dict[str, Operation] = {}


def register(name, params=None, check=None, artifact="image", summary=""):
    def deco(fn):
        REGISTRY[name] = Operation(name, fn, dict(params or {}), check, artifact, summary)
        return fn
    return deco


def _gray(img):
    """Gray view of the current image; RGB inputs are reduced to luma."""
    arr = np.asarray(img, dtype=np.float64)
    return raster.to_gray(arr) if arr.ndim == 3 else raster.as_gray(arr)


def _normalized(mag):
    top = float(mag.max(initial=0.0))
    return mag / top if top > 0 else mag


# -- image-to-image ops -------------------------------------------------------

@register("gaussian_blur", {"sigma": _width(1.0), "radius": _int(None)}, summary="Gaussian smoothing")
def _op_gaussian(img, p, env):
    return StageResult(denoise.gaussian_blur(_gray(img), p["sigma"], env.border, p["radius"]))


@register("median_blur", {"radius": _int(1)}, summary="median filter over a (2r+1)^2 window")
def _op_median(img, p, env):
    return StageResult(denoise.median_blur(_gray(img), p["radius"], env.border))


@register("mean_blur", {"radius": _int(1)}, summary="box filter over a (2r+1)^2 window")
def _op_mean(img, p, env):
    return StageResult(denoise.mean_blur(_gray(img), p["radius"], env.border))


@register("bilateral", {"sigma_spatial": _width(3.0), "sigma_range": _width(0.1), "radius": _int(None)},
          summary="edge-preserving bilateral filter")
def _op_bilateral(img, p, env):
    params = denoise.BilateralParams(p["sigma_spatial"], p["sigma_range"], p["radius"])
    return StageResult(denoise.bilateral(_gray(img), params, env.border))


@register("add_salt_pepper", {"p": Param(float, 0.05, low=0.0, high=1.0), "seed": _int(None, low=0)},
          summary="impulse noise; seed defaults to the pipeline seed")
def _op_noise(img, p, env):
    seed = env.seed if p["seed"] is None else p["seed"]
    out = denoise.add_salt_pepper(img, denoise.NoiseSpec(p["p"], seed))
    return StageResult(out, {"seed": seed, "rng": denoise.NOISE_RNG})


_SE_PARAMS = {"shape": Param(str, "square", choices=("square", "disk")), "size": _int(3)}


def _check_se(p):
    if p["shape"] == "square" and p["size"] % 2 == 0:
        raise ValueError("square structuring element size must be odd")


def _morph(fn):
    def run(img, p, env):
        se = morphology.StructuringElement.from_spec(p)
        return StageResult(fn(_gray(img), se, env.border))
    return run


for _name, _fn, _what in (("erode", morphology.erode, "grayscale erosion"),
                          ("dilate", morphology.dilate, "grayscale dilation"),
                          ("open", morphology.opening, "opening (erode then dilate)"),
                          ("close", morphology.closing, "closing (dilate then erode)"),
                          ("morph_gradient", morphology.morph_gradient, "dilation minus erosion")):
    register(_name, _SE_PARAMS, _check_se, summary=_what)(_morph(_fn))


def _gradient_op(operator):
    def run(img, p, env):
        field_ = edges.gradient(_gray(img), operator, env.border)
        mag = field_.magnitude
        return StageResult(_normalized(mag) if p["normalize"] else mag,
                           {"max_magnitude": float(mag.max())})
    return run


for _name in ("sobel", "prewitt", "scharr", "roberts"):
    register(_name, {"normalize": Param(bool, True)}, summary=f"{_name} gradient magnitude")(_gradient_op(_name))


@register("hybrid_gradient", {"kind": Param(str, "scharr_sobel", choices=("scharr_sobel", "scharr_prewitt")),
                              "normalize": Param(bool, True)},
          summary="Scharr x-derivative with a Sobel or Prewitt y-derivative")
def _op_hybrid(img, p, env):
    mag = edges.hybrid_gradient(_gray(img), p["kind"], env.border).magnitude
    return StageResult(_normalized(mag) if p["normalize"] else mag, {"max_magnitude": float(mag.max())})


_FAMILY_PARAMS = {"gabor": ("sigma", "wavelength"), "lmak": ("gamma", "steepness"),
                  "pvmak": ("f_gaussian", "f_lorentzian", "steepness")}


def _check_kernel(p):
    allowed = set(_FAMILY_PARAMS[p["family"]])
    for key in ("sigma", "wavelength", "gamma", "steepness", "f_gaussian", "f_lorentzian"):
        if p[key] is not None and key not in allowed:
            raise ValueError(f"parameter {key!r} does not apply to the {p['family']} family")
    if p["family"] == "pvmak":
        pseudo_voigt_mix(4.0 if p["f_gaussian"] is None else p["f_gaussian"],
                         4.0 if p["f_lorentzian"] is None else p["f_lorentzian"])


@register("kernel_edges",
          {"family": Param(str, "pvmak", choices=("gabor", "lmak", "pvmak")),
           "theta": Param(float, 0.0), "orientations": _int(4), "radius": _int(None),
           "sigma": _width(None), "wavelength": _width(None), "gamma": _width(None), "steepness": _width(None),
           "f_gaussian": _nonneg(None), "f_lorentzian": _nonneg(None), "normalize": Param(bool, True)},
          check=_check_kernel, summary="oriented Gabor / LMAK / PVMAK edge response")
def _op_kernel_edges(img, p, env):
    extra = {k: p[k] for k in _FAMILY_PARAMS[p["family"]] if p[k] is not None}
    resp = edges.kernel_edge_response(_gray(img), p["family"], p["theta"], p["orientations"],
                                      p["radius"], env.border, **extra)
    return StageResult(_normalized(resp) if p["normalize"] else resp, {"max_response": float(resp.max())})


def _check_canny(p):
    _check_sigma_or_zero(p)
    if p["low"] > p["high"]:
        raise ValueError("canny needs low <= high")


@register("canny", {"sigma": _nonneg(1.0), "low": _nonneg(0.1), "high": _nonneg(0.2)},
          check=_check_canny, summary="Canny edge map (thresholds in Sobel magnitude units)")
def _op_canny(img, p, env):
    em = edges.canny(_gray(img), p["sigma"], p["low"], p["high"], env.border)
    return StageResult(em.to_image(), {"edge_pixels": int(em.mask.sum())},
                       overlay=overlay.overlay_edges(img, em))


@register("canny_otsu", {"sigma": _nonneg(1.0)}, check=_check_sigma_or_zero, summary="Canny with Otsu-derived thresholds")
def _op_canny_otsu(img, p, env):
    em = edges.canny_otsu(_gray(img), p["sigma"], env.border)
    return StageResult(em.to_image(), {"edge_pixels": int(em.mask.sum()), "low": em.low, "high": em.high},
                       overlay=overlay.overlay_edges(img, em))


# -- geometry -----------------------------------------------------------------

@register("rotate", {"angle": Param(float, 90.0), "reshape": Param(bool, True)},
          summary="anti-clockwise rotation in degrees")
def _op_rotate(img, p, env):
    return StageResult(raster.rotate(img, p["angle"], p["reshape"]))


@register("flip", {"axis": Param(str, "horizontal", choices=("horizontal", "vertical"))},
          summary="mirror the image")
def _op_flip(img, p, env):
    return StageResult(raster.flip(img, p["axis"]))


@register("rescale", {"factor": _pos(2.0), "method": Param(str, "bilinear", choices=("nearest", "bilinear"))},
          summary="zoom by a factor")
def _op_rescale(img, p, env):
    return StageResult(raster.rescale(img, p["factor"], p["method"]))


@register("crop", {"x": _int(0, low=0), "y": _int(0, low=0), "width": _int(), "height": _int()},
          summary="cut out a rectangle")
def _op_crop(img, p, env):
    return StageResult(raster.crop(img, p["x"], p["y"], p["width"], p["height"]))


@register("to_gray", {}, summary="luma conversion of an RGB image")
def _op_to_gray(img, p, env):
    return StageResult(_gray(img))


# -- thresholds and segmentation -----------------------------------------------

@register("threshold", {"t": Param(float, 128.0, low=0.0, high=255.0)},
          summary="binary mask of pixels above t (0-255 scale)")
def _op_threshold(img, p, env):
    labels = segmentation.threshold(_gray(img), p["t"] / 255.0)
    fg = labels == 2
    return StageResult(fg.astype(np.float64), {"foreground_pixels": int(fg.sum())})


@register("otsu", {}, artifact="image", summary="Otsu binarization; prints the 0-255 level")
def _op_otsu(img, p, env):
    arr = _gray(img)
    res = segmentation.otsu(arr)
    fg = arr > res.threshold
    return StageResult(fg.astype(np.float64), {"level": res.level, "threshold": res.threshold,
                                               "foreground_pixels": int(fg.sum())})


def _label_result(img, labels):
    stats = segmentation.label_stats(labels, img)
    csv = "label,pixels,mean\n" + "".join(f"{lab},{cnt},{mean!r}\n" for lab, cnt, mean in stats)
    return StageResult(img, {"label_count": segmentation.n_labels(labels)}, csv=csv, labels=labels,
                       overlay=overlay.overlay_labels(img, labels))


@register("kmeans", {"k": _int(3), "seed": _int(None, low=0)}, artifact="labels",
          summary="k-means clustering of intensities")
def _op_kmeans(img, p, env):
    seed = env.seed if p["seed"] is None else p["seed"]
    return _label_result(img, segmentation.kmeans_intensity(_gray(img), p["k"], seed))


@register("watershed", {"percentile": Param(float, 10.0, low=0.0, high=100.0, low_open=True, high_open=True),
                        "gradient": Param(str, "morph", choices=("morph", "sobel"))},
          artifact="labels", summary="marker watershed on a gradient landscape")
def _op_watershed(img, p, env):
    arr = _gray(img)
    if p["gradient"] == "sobel":
        grad = edges.gradient(arr, "sobel", env.border).magnitude
    else:
        grad = morphology.morph_gradient(arr, morphology.StructuringElement.disk(1), env.border)
    markers = segmentation.auto_markers(arr, p["percentile"], gradient=grad)
    return _label_result(img, segmentation.watershed(grad, markers))


@register("slic", {"n_segments": _int(100), "compactness": _pos(0.1), "max_iter": _int(10)},
          artifact="labels", summary="SLIC superpixels")
def _op_slic(img, p, env):
    params = segmentation.SlicParams(p["n_segments"], p["compactness"], p["max_iter"])
    return _label_result(img, segmentation.slic(_gray(img), params))


@register("felzenszwalb", {"scale": _pos(1.0), "sigma": _width(0.8), "min_size": _int(20)},
          artifact="labels", summary="graph-based segmentation")
def _op_felz(img, p, env):
    params = segmentation.FelzParams(p["scale"], p["sigma"], p["min_size"])
    return _label_result(img, segmentation.felzenszwalb(_gray(img), params))


# -- blobs and descriptors --------------------------------------------------------

def _check_blobs(p):
    if p["t_min"] >= p["t_max"]:
        raise ValueError("blob detection needs t_min < t_max")


def _blob_op(detector, default_threshold):
    params = {"t_min": _width(1.0), "t_max": _width(64.0), "n_scales": _int(30, low=3),
              "threshold": _nonneg(default_threshold), "max_overlap": Param(float, 0.5, low=0.0, high=1.0),
              "exclude_border": Param(bool, True)}

    def run(img, p, env):
        arr = _gray(img)
        found = detector(arr, p["t_min"], p["t_max"], p["n_scales"], p["threshold"],
                         p["exclude_border"], p["max_overlap"])
        return StageResult(img, {"blob_count": len(found)}, csv=blobs.blobs_to_csv(found),
                           overlay=overlay.overlay_blobs(img, found))
    return params, run


for _name, _det, _thr in (("blobs_log", blobs.detect_blobs_log, 0.02),
                          ("blobs_dog", blobs.detect_blobs_dog, 0.02),
                          ("blobs_doh", blobs.detect_blobs_doh, 0.001)):
    _params, _run = _blob_op(_det, _thr)
    register(_name, _params, _check_blobs, artifact="csv",
             summary=f"scale-space blobs ({_name[6:].upper()}), CSV output")(_run)


@register("hog", {"cell_size": _int(8, low=2), "block_size": _int(2), "n_bins": _int(9, low=2),
                  "block_stride": _int(1)}, artifact="csv", summary="HOG descriptor, CSV output")
def _op_hog(img, p, env):
    spec = HogSpec(p["cell_size"], p["block_size"], p["n_bins"], p["block_stride"])
    arr = _gray(img)
    desc = hog_descriptor(arr, spec)
    return StageResult(img, {"descriptor_length": int(desc.size)}, csv=descriptor_to_csv(desc),
                       render=hog_render(desc, spec, arr.shape))


# -- spec parsing ----------------------------------------------------------------

@dataclass(frozen=True)
class Stage:
    op: str
    params: dict
    save_as: str | None = None


@dataclass(frozen=True)
class PipelineSpec:
    version: int
    stages: tuple
    seed: int = 0
    border_policy: str = "reflect"

    def canonical(self) -> str:
        body = {"version": self.version,
                "global": {"seed": self.seed, "border_policy": self.border_policy},
                "stages": [{"op": s.op, "params": s.params, "save_as": s.save_as} for s in self.stages]}
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


def _check_keys(obj, allowed, where):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise PipelineError(f"unknown key {extra[0]!r} {where}")


def validate_params(op_name: str, params: dict) -> dict:
    """Fill defaults and check types/ranges; raises ``ValueError``."""
    op = REGISTRY.get(op_name)
    if op is None:
        raise ValueError(f"unknown operation {op_name!r}")
    unknown = sorted(set(params) - set(op.params))
    if unknown:
        raise ValueError(f"unknown parameter {unknown[0]!r} for {op_name}")
    out = {}
    for name, schema in op.params.items():
        if name in params:
            out[name] = schema.coerce(name, params[name])
        elif schema.default is _REQUIRED:
            raise ValueError(f"missing required parameter {name!r} for {op_name}")
        else:
            out[name] = schema.default
    if op.check is not None:
        op.check(out)
    return out


def _validate_stage(i, raw, seen_names):
    if not isinstance(raw, dict):
        raise PipelineError(f"stage {i} must be an object")
    _check_keys(raw, ("op", "params", "save_as"), f"at stage {i}")
    name = raw.get("op")
    if not isinstance(name, str):
        raise PipelineError(f"missing or non-string 'op' at stage {i}")
    if name not in REGISTRY:
        raise PipelineError(f"unknown operation at stage {i}: {name!r}")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise PipelineError(f"'params' must be an object at stage {i}")
    try:
        params = validate_params(name, params)
    except ValueError as exc:
        raise PipelineError(f"{exc} at stage {i}") from None
    save_as = raw.get("save_as")
    if save_as is not None:
        if not isinstance(save_as, str) or not _NAME_RE.match(save_as) or save_as in ("final", "report"):
            raise PipelineError(f"invalid save_as name {save_as!r} at stage {i}")
        if save_as in seen_names:
            raise PipelineError(f"duplicate save_as name {save_as!r} at stage {i}")
        seen_names.add(save_as)
    return Stage(name, params, save_as)


def pipeline_from_dict(obj) -> PipelineSpec:
    if not isinstance(obj, dict):
        raise PipelineError("pipeline must be a JSON object")
    _check_keys(obj, ("version", "stages", "global"), "at top level")
    version = obj.get("version")
    if version != SCHEMA_VERSION or isinstance(version, bool):
        raise PipelineError(f"unsupported pipeline version {version!r}; expected {SCHEMA_VERSION}")
    glob = obj.get("global", {})
    if not isinstance(glob, dict):
        raise PipelineError("'global' must be an object")
    _check_keys(glob, ("seed", "border_policy"), "in 'global'")
    seed = glob.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise PipelineError(f"global seed must be a non-negative integer, got {seed!r}")
    border = glob.get("border_policy", "reflect")
    try:
        if not isinstance(border, str):
            raise ValueError("must be a string")
        BorderPolicy.parse(border)
    except ValueError as exc:
        raise PipelineError(f"invalid border_policy {border!r}: {exc}") from None
    stages = obj.get("stages")
    if not isinstance(stages, list):
        raise PipelineError("'stages' must be a list")
    seen: set = set()
    return PipelineSpec(version, tuple(_validate_stage(i, s, seen) for i, s in enumerate(stages)), seed, border)


def parse_pipeline_text(text: str) -> PipelineSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PipelineError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return pipeline_from_dict(obj)


def parse_pipeline(path) -> PipelineSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise PipelineError(f"cannot read pipeline {path}: {exc}") from None
    return parse_pipeline_text(text)


# -- execution -----------------------------------------------------------------------

@dataclass
class StageRecord:
    op: str
    ms: float | None
    outputs: list
    stats: dict


@dataclass
class RunReport:
    stages: list
    seed: int
    pipeline_sha256: str
    status: str = "ok"
    error: str | None = None
    failed_stage: int | None = None

    def to_dict(self) -> dict:
        out = {"stages": [{"op": s.op, "ms": s.ms, "outputs": s.outputs, "stats": s.stats} for s in self.stages],
               "seed": self.seed, "pipeline_sha256": self.pipeline_sha256, "status": self.status}
        if self.status != "ok":
            out["error"] = self.error
            out["failed_stage"] = self.failed_stage
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def image_stats(img) -> dict:
    arr = np.asarray(img, dtype=np.float64)
    return {"min": float(arr.min()), "max": float(arr.max()), "mean": float(arr.mean())}


def _ext(img):
    return ".ppm" if np.asarray(img).ndim == 3 else ".pgm"


def write_stage_files(result: StageResult, out_dir: Path, prefix: str, save_as: str | None) -> list:
    """Write a stage's named image and side files; returns the file names."""
    written = []

    def put(name, data):
        (out_dir / name).write_bytes(data)
        written.append(name)

    if save_as is not None:
        put(save_as + _ext(result.image), encode_netpbm(result.image))
    if result.csv is not None:
        put(prefix + ".csv", result.csv.encode("utf-8"))
    if result.labels is not None:
        put(prefix + "_labels.pgm", encode_label_map(result.labels))
    if result.overlay is not None:
        put(prefix + "_overlay.ppm", encode_netpbm(result.overlay))
    if result.render is not None:
        put(prefix + "_render.pgm", encode_netpbm(result.render))
    return written


def run_stage(op_name: str, img, params: dict, env: Env) -> StageResult:
    return REGISTRY[op_name].run(img, params, env)


def run_pipeline(spec: PipelineSpec, input_path, out_dir, seed: int | None = None,
                 threads: int | None = None, timings: bool = False) -> RunReport:
    """Execute ``spec`` on one input image, writing everything to ``out_dir``.

    Wall times are recorded only when ``timings`` is set; otherwise ``ms`` is
    null so repeated runs produce byte-identical directories.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    used_seed = spec.seed if seed is None else int(seed)
    env = Env(used_seed, BorderPolicy.parse(spec.border_policy))
    report = RunReport([], used_seed, spec.sha256)
    img = load_image(input_path)
    with _backend.threads(threads if threads is not None else _backend.get_threads()):
        for i, stage in enumerate(spec.stages):
            start = time.perf_counter()
            try:
                result = run_stage(stage.op, img, stage.params, env)
                prefix = stage.save_as or f"stage{i:02d}_{stage.op}"
                outputs = write_stage_files(result, out_dir, prefix, stage.save_as)
            except Exception as exc:  # noqa: BLE001 - any stage failure aborts the run
                report.status = "failed"
                report.error = f"stage {i} ({stage.op}): {exc}"
                report.failed_stage = i
                (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
                raise PipelineRunError(report.error, report) from exc
            img = result.image
            ms = round((time.perf_counter() - start) * 1000.0, 3) if timings else None
            report.stages.append(StageRecord(stage.op, ms, outputs, {**image_stats(img), **result.stats}))
    final = _gray(img)
    (out_dir / "final.pgm").write_bytes(encode_netpbm(final))
    if np.asarray(img).ndim == 3:
        (out_dir / "final.ppm").write_bytes(encode_netpbm(img))
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    return report
