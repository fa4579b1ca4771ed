"""Multi-scale blob detection: LoG, DoG and determinant of Hessian.

The scale space is ``L(t) = f * g(t)`` with ``g`` the Gaussian of variance
``t``. Responses are scale-normalized so a Gaussian blob of variance ``s^2``
peaks at ``t = s^2``; the reported radius is ``sqrt(2 t)``.

Sign convention for LoG/DoG: positive response means a dark blob.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .denoise import gaussian_blur
from .raster import as_gray


@dataclass(frozen=True)
class Blob:
    x: float
    y: float
    scale: float
    response: float
    polarity: str  # "dark", "bright" or "unsigned"

    @property
    def radius(self) -> float:
        return math.sqrt(2.0 * self.scale)


@dataclass(frozen=True)
class ScaleSpace:
    scales: np.ndarray  # strictly increasing t values
    planes: np.ndarray  # (n, h, w)

    def __post_init__(self):
        if len(self.scales) < 2 or np.any(np.diff(self.scales) <= 0):
            raise ValueError("scale space needs >= 2 strictly increasing scales")


def scale_levels(t_min: float, t_max: float, n_scales: int) -> np.ndarray:
    """Geometric progression of ``n_scales`` values from ``t_min`` to ``t_max``."""
    if not 0 < t_min < t_max:
        raise ValueError(f"need 0 < t_min < t_max, got {t_min}, {t_max}")
    if n_scales < 3:
        raise ValueError("need at least 3 scales")
    return t_min * (t_max / t_min) ** (np.arange(n_scales) / (n_scales - 1))


def smooth(img, t: float) -> np.ndarray:
    """``L(t)``: Gaussian smoothing at variance ``t``.

    The kernel reaches ``4 sigma``; scale derivatives amplify truncation
    error, so the denoise default of ``3 sigma`` is too short here.
    """
    sigma = math.sqrt(t)
    return gaussian_blur(img, sigma, radius=max(1, math.ceil(4.0 * sigma)))


def _derivatives(L):
    p = np.pad(L, 1, mode="symmetric")
    c = p[1:-1, 1:-1]
    lxx = p[1:-1, 2:] - 2.0 * c + p[1:-1, :-2]
    lyy = p[2:, 1:-1] - 2.0 * c + p[:-2, 1:-1]
    lxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / 4.0
    return lxx, lyy, lxy


def log_response(img, t: float) -> np.ndarray:
    """Scale-normalized Laplacian ``t (L_xx + L_yy)`` by central differences."""
    if not t > 0:
        raise ValueError("scale t must be > 0")
    lxx, lyy, _ = _derivatives(smooth(as_gray(img), t))
    return t * (lxx + lyy)


def doh_response(img, t: float) -> np.ndarray:
    if not t > 0:
        raise ValueError("scale t must be > 0")
    lxx, lyy, lxy = _derivatives(smooth(as_gray(img), t))
    return t * t * (lxx * lyy - lxy * lxy)


def dog_response(lower: np.ndarray, upper: np.ndarray, t_lower: float, t_upper: float) -> np.ndarray:
    """Normalized Laplacian estimate from two smoothed levels.

    Because ``dL/dt = (1/2) lap L``, the difference quotient is doubled and
    attributed to the midpoint scale ``t = (t_lower + t_upper) / 2``, where it
    is second-order accurate: ``2 t / dt * (L(t_upper) - L(t_lower))``.
    """
    t_mid = 0.5 * (t_lower + t_upper)
    return (2.0 * t_mid / (t_upper - t_lower)) * (upper - lower)


def log_scale_space(img, scales) -> ScaleSpace:
    arr = as_gray(img)
    return ScaleSpace(np.asarray(scales), np.stack([log_response(arr, t) for t in scales]))


def dog_scale_space(img, scales) -> ScaleSpace:
    """DoG planes centred on each of ``scales`` (a geometric progression).

    Smoothed levels sit at ``a_i = 2 t_i / (1 + q)`` and ``q a_i`` so each
    pair's midpoint is exactly ``t_i``.
    """
    arr = as_gray(img)
    scales = np.asarray(scales, dtype=np.float64)
    q = scales[1] / scales[0]
    levels = np.append(2.0 * scales / (1.0 + q), 2.0 * scales[-1] * q / (1.0 + q))
    smoothed = [smooth(arr, t) for t in levels]
    planes = [dog_response(smoothed[i], smoothed[i + 1], levels[i], levels[i + 1])
              for i in range(len(scales))]
    return ScaleSpace(scales, np.stack(planes))


def doh_scale_space(img, scales) -> ScaleSpace:
    arr = as_gray(img)
    return ScaleSpace(np.asarray(scales), np.stack([doh_response(arr, t) for t in scales]))


def local_extrema(volume: np.ndarray, sign: float = 1.0) -> np.ndarray:
    """Strict 26-neighbourhood maxima of ``sign * volume``.

    The first and last scale levels never qualify; spatial neighbours off
    the image are ignored.
    """
    v = sign * np.asarray(volume, dtype=np.float64)
    n, h, w = v.shape
    out = np.zeros(v.shape, dtype=bool)
    if n < 3:
        return out
    p = np.pad(v, ((0, 0), (1, 1), (1, 1)), mode="constant", constant_values=-np.inf)
    center = v[1:-1]
    is_max = np.ones(center.shape, dtype=bool)
    for ds in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if ds == dy == dx == 0:
                    continue
                nb = p[1 + ds:n - 1 + ds, 1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
                is_max &= center > nb
    out[1:-1] = is_max
    return out


def _disk_overlap(r1, r2, d):
    """Intersection area of two disks over the smaller disk's area."""
    if d >= r1 + r2:
        return 0.0
    small = min(r1, r2)
    if d <= abs(r1 - r2):
        return 1.0
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    a3 = 0.5 * math.sqrt(max(0.0, (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)))
    return (a1 + a2 - a3) / (math.pi * small * small)


def prune_overlaps(blobs, max_overlap: float = 0.5):
    """Greedy: strongest first; drop blobs overlapping a kept one by more than ``max_overlap``."""
    ranked = sorted(blobs, key=lambda b: (-abs(b.response), b.scale, b.y, b.x))
    kept = []
    for b in ranked:
        if all(_disk_overlap(b.radius, k.radius, math.hypot(b.x - k.x, b.y - k.y)) <= max_overlap
               for k in kept):
            kept.append(b)
    return kept


def _collect(space: ScaleSpace, threshold, signs, exclude_border, max_overlap):
    h, w = space.planes.shape[1:]
    found = []
    for sign, polarity in signs:
        mask = local_extrema(space.planes, sign) & (sign * space.planes >= threshold)
        for s, y, x in zip(*np.nonzero(mask)):
            t = float(space.scales[s])
            if exclude_border:
                margin = math.ceil(math.sqrt(2.0 * t))
                if y < margin or x < margin or y >= h - margin or x >= w - margin:
                    continue
            found.append(Blob(float(x), float(y), t, float(space.planes[s, y, x]), polarity))
    return prune_overlaps(found, max_overlap) if max_overlap < 1.0 else found


def _check(t_min, t_max, n_scales, threshold):
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    return scale_levels(t_min, t_max, n_scales)


def detect_blobs_log(img, t_min=1.0, t_max=64.0, n_scales=30, threshold=0.02,
                     exclude_border=True, max_overlap=0.5):
    scales = _check(t_min, t_max, n_scales, threshold)
    space = log_scale_space(img, scales)
    return _collect(space, threshold, ((1.0, "dark"), (-1.0, "bright")), exclude_border, max_overlap)


def detect_blobs_dog(img, t_min=1.0, t_max=64.0, n_scales=30, threshold=0.02,
                     exclude_border=True, max_overlap=0.5):
    scales = _check(t_min, t_max, n_scales, threshold)
    space = dog_scale_space(img, scales)
    return _collect(space, threshold, ((1.0, "dark"), (-1.0, "bright")), exclude_border, max_overlap)


def detect_blobs_doh(img, t_min=1.0, t_max=64.0, n_scales=30, threshold=0.001,
                     exclude_border=True, max_overlap=0.5):
    """Maxima of ``t^2 det(H L)``; blob polarity is not separated."""
    scales = _check(t_min, t_max, n_scales, threshold)
    space = doh_scale_space(img, scales)
    return _collect(space, threshold, ((1.0, "unsigned"),), exclude_border, max_overlap)


def blobs_to_csv(blobs) -> str:
    lines = ["x,y,radius,scale,response,polarity"]
    lines += [f"{b.x:g},{b.y:g},{b.radius!r},{b.scale!r},{b.response!r},{b.polarity}" for b in blobs]
    return "\n".join(lines) + "\n"


def blobs_from_csv(text: str):
    rows = [ln for ln in text.strip().splitlines()[1:] if ln.strip()]
    out = []
    for ln in rows:
        x, y, _radius, scale, response, polarity = ln.split(",")
        out.append(Blob(float(x), float(y), float(scale), float(response), polarity))
    return out
