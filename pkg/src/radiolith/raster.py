"""Geometric transforms, centroid, histograms and color reduction.

Coordinates follow the usual raster convention: ``x`` is the column,
``y`` the row, origin at the top-left pixel.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class Centroid(NamedTuple):
    cx: float
    cy: float


class Histogram(NamedTuple):
    bins: np.ndarray  # 256 int64 counts
    total: int


def as_gray(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a single-channel (h, w) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    return arr


def as_rgb(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected a 3-channel (h, w, 3) image, got shape {arr.shape}")
    return arr


def flip(img, axis: str) -> np.ndarray:
    """Mirror the image.

    ``"vertical"`` reverses the row order (top-bottom mirror),
    ``"horizontal"`` reverses the column order (left-right mirror).
    """
    arr = np.asarray(img, dtype=np.float64)
    if axis == "vertical":
        return arr[::-1].copy()
    if axis == "horizontal":
        return arr[:, ::-1].copy()
    raise ValueError(f"axis must be 'horizontal' or 'vertical', not {axis!r}")


def _snap(v: float) -> float:
    # cos/sin of multiples of 90 degrees must be exact for index permutations
    r = round(v)
    return float(r) if abs(v - r) < 1e-12 else v


def _bilinear(arr, xs, ys, fill=0.0, clamp=False):
    """Sample ``arr`` at real coordinates; samples off the grid get ``fill``."""
    h, w = arr.shape[:2]
    eps = 1e-9
    if clamp:
        xs = np.clip(xs, 0.0, w - 1)
        ys = np.clip(ys, 0.0, h - 1)
        inside = np.ones(xs.shape, dtype=bool)
    else:
        inside = (xs >= -eps) & (xs <= w - 1 + eps) & (ys >= -eps) & (ys <= h - 1 + eps)
        xs = np.clip(xs, 0.0, w - 1)
        ys = np.clip(ys, 0.0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if arr.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
        inside_b = inside[..., None]
    else:
        inside_b = inside
    top = arr[y0, x0] * (1.0 - fx) + arr[y0, x1] * fx
    bottom = arr[y1, x0] * (1.0 - fx) + arr[y1, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    # exact grid hits keep the source value bit-for-bit
    exact = (fx == 0) & (fy == 0)
    out = np.where(exact, arr[y0, x0], out)
    return np.where(inside_b, out, fill)


def rotate(img, angle_deg: float, reshape: bool = True) -> np.ndarray:
    """Rotate anti-clockwise about the image center with bilinear sampling.

    With ``reshape`` the canvas grows to the rotated bounding box; samples
    falling outside the source are 0.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape[:2]
    theta = math.radians(angle_deg)
    c, s = _snap(math.cos(theta)), _snap(math.sin(theta))
    if reshape:
        out_w = max(1, math.ceil(w * abs(c) + h * abs(s) - 1e-9))
        out_h = max(1, math.ceil(w * abs(s) + h * abs(c) - 1e-9))
    else:
        out_w, out_h = w, h
    yy, xx = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    dx = xx - (out_w - 1) / 2.0
    dy = yy - (out_h - 1) / 2.0
    # inverse map: rows grow downward, so a visual anti-clockwise turn
    # sends source (dx, dy) to (dx c + dy s, -dx s + dy c)
    src_x = dx * c - dy * s + (w - 1) / 2.0
    src_y = dx * s + dy * c + (h - 1) / 2.0
    return _bilinear(arr, src_x, src_y, fill=0.0)


def rescale(img, factor: float, method: str = "bilinear") -> np.ndarray:
    """Zoom by ``factor``; output size is ``round(factor * size)`` per axis."""
    if not factor > 0:
        raise ValueError("scale factor must be > 0")
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape[:2]
    out_h = int(math.floor(h * factor + 0.5))
    out_w = int(math.floor(w * factor + 0.5))
    if out_h < 1 or out_w < 1:
        raise ValueError(f"rescale by {factor} gives a degenerate {out_w}x{out_h} image")
    sy, sx = h / out_h, w / out_w
    if method == "nearest":
        ys = np.minimum(np.floor((np.arange(out_h) + 0.5) * sy).astype(np.intp), h - 1)
        xs = np.minimum(np.floor((np.arange(out_w) + 0.5) * sx).astype(np.intp), w - 1)
        return arr[ys][:, xs].copy()
    if method == "bilinear":
        ys = (np.arange(out_h) + 0.5) * sy - 0.5
        xs = (np.arange(out_w) + 0.5) * sx - 0.5
        gy, gx = np.meshgrid(ys, xs, indexing="ij")
        return _bilinear(arr, gx, gy, clamp=True)
    raise ValueError(f"unknown interpolation method {method!r}")


def crop(img, x0: int, y0: int, w: int, h: int) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    H, W = arr.shape[:2]
    if w < 1 or h < 1 or x0 < 0 or y0 < 0 or x0 + w > W or y0 + h > H:
        raise ValueError(f"crop window ({x0}, {y0}, {w}, {h}) outside {W}x{H} image")
    return arr[y0:y0 + h, x0:x0 + w].copy()


def centroid(img) -> Centroid:
    """Intensity-weighted center of mass."""
    arr = as_gray(img)
    # fixed order: per-row sums, then across rows
    row_sums = arr.sum(axis=1)
    total = float(row_sums.sum())
    if not total > 0:
        raise ValueError("centroid of an all-zero image is undefined")
    # weights are normalized before the moments so a lone pixel lands exactly
    p = arr / total
    xs = np.arange(arr.shape[1], dtype=np.float64)
    ys = np.arange(arr.shape[0], dtype=np.float64)
    cx = float((p * xs).sum(axis=1).sum())
    cy = float((p.sum(axis=1) * ys).sum())
    return Centroid(cx, cy)


def histogram(img) -> Histogram:
    """256-bin intensity histogram; bin ``b`` covers ``[b/256, (b+1)/256)``."""
    arr = as_gray(img)
    idx = np.clip(np.floor(np.clip(arr, 0.0, 1.0) * 256.0), 0, 255).astype(np.intp)
    bins = np.bincount(idx.ravel(), minlength=256).astype(np.int64)
    return Histogram(bins, int(arr.size))


def to_gray(rgb) -> np.ndarray:
    arr = as_rgb(rgb)
    r, g, b = LUMA_WEIGHTS
    return r * arr[..., 0] + g * arr[..., 1] + b * arr[..., 2]


def value_channel(rgb) -> np.ndarray:
    """HSV value plane, i.e. ``max(R, G, B)``."""
    return as_rgb(rgb).max(axis=2)


def split_channels(rgb):
    arr = as_rgb(rgb)
    return tuple(arr[..., i].copy() for i in range(3))


def merge_channels(r, g, b) -> np.ndarray:
    return np.stack([as_gray(r), as_gray(g), as_gray(b)], axis=2)


def gray_to_rgb(img) -> np.ndarray:
    arr = as_gray(img)
    return np.repeat(arr[:, :, None], 3, axis=2)
