"""Gradient operators, kernel-modulated edge responses and Canny.

Gradient kernels are applied as correlations so that ``gx > 0`` where
intensity grows to the right and ``gy > 0`` where it grows downward.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .denoise import gaussian_blur
from .kernels import (BorderPolicy, convolve, gabor_kernel, lmak_kernel,
                      pseudo_voigt_mix, pvmak_kernel)
from .raster import as_gray, as_rgb, split_channels, value_channel
from .segmentation import connected_components, otsu_from_histogram

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
PREWITT_X = np.array([[-1, 0, 1], [-1, 0, 1], [-1, 0, 1]], dtype=np.float64)
SCHARR_X = np.array([[-3, 0, 3], [-10, 0, 10], [-3, 0, 3]], dtype=np.float64)
ROBERTS_A = np.array([[1, 0], [0, -1]], dtype=np.float64)
ROBERTS_B = np.array([[0, 1], [-1, 0]], dtype=np.float64)

OPERATORS = {
    "sobel": (SOBEL_X, SOBEL_X.T),
    "prewitt": (PREWITT_X, PREWITT_X.T),
    "scharr": (SCHARR_X, SCHARR_X.T),
}
# (outer, centre) row weights of each x kernel's right column
_WEIGHTS = {"sobel": (1.0, 2.0), "prewitt": (1.0, 1.0), "scharr": (3.0, 10.0)}
ROBERTS_OFFSET = -3.0 * math.pi / 4.0


def _wrap_angle(theta):
    """Wrap into (-pi, pi]."""
    out = np.mod(theta + math.pi, 2.0 * math.pi) - math.pi
    return np.where(out <= -math.pi, math.pi, out)


@dataclass(frozen=True)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    operator: str = "sobel"

    @property
    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.gx * self.gx + self.gy * self.gy)

    @property
    def direction(self) -> np.ndarray:
        """Full-quadrant direction ``atan2(gy, gx)`` in (-pi, pi].

        Roberts fields carry the diagonal-pair offset of -3pi/4.
        """
        theta = np.arctan2(self.gy, self.gx)
        if self.operator == "roberts":
            theta = theta + ROBERTS_OFFSET
        return _wrap_angle(theta)

    @property
    def paper_direction(self) -> np.ndarray:
        """``atan(gx / gy)``: the transposed convention, kept for comparison."""
        with np.errstate(divide="ignore", invalid="ignore"):
            theta = np.arctan(self.gx / self.gy)
        theta = np.where(self.gy == 0, np.sign(self.gx) * (math.pi / 2.0), theta)
        if self.operator == "roberts":
            theta = theta + ROBERTS_OFFSET
        return theta


@dataclass(frozen=True)
class EdgeMap:
    mask: np.ndarray  # bool
    low: float
    high: float

    def to_image(self) -> np.ndarray:
        return self.mask.astype(np.float64)


def _roberts(arr, border):
    # 2x2 pair anchored at the top-left pixel: needs one extra row/column
    p = BorderPolicy.parse(border).pad(arr, 1)[1:, 1:]
    h, w = arr.shape
    a, b = p[:h, :w], p[:h, 1:w + 1]
    c, d = p[1:h + 1, :w], p[1:h + 1, 1:w + 1]
    return a - d, b - c


def _dx(p, weights):
    """Correlation with a 3x3 x kernel, written as weighted central differences.

    ``p`` is the image padded by one pixel. Each difference is exactly zero
    on a constant patch, so flat regions give an exact zero gradient, and
    the y derivative of an image equals the x derivative of its transpose.
    """
    outer, centre = weights
    d = p[:, 2:] - p[:, :-2]
    return (outer * d[:-2] + centre * d[1:-1]) + outer * d[2:]


def _derivatives(arr, operator, border):
    try:
        weights = _WEIGHTS[operator]
    except KeyError:
        raise ValueError(f"unknown gradient operator {operator!r}") from None
    p = BorderPolicy.parse(border).pad(arr, 1)
    return _dx(p, weights), _dx(p.T, weights).T


def gradient(img, operator: str = "sobel", border="reflect") -> GradientField:
    """Derivatives with the 3x3 Sobel, Prewitt or Scharr pair, or the 2x2 Roberts pair."""
    arr = as_gray(img)
    if operator == "roberts":
        gx, gy = _roberts(arr, border)
        return GradientField(gx, gy, "roberts")
    gx, gy = _derivatives(arr, operator, border)
    return GradientField(np.ascontiguousarray(gx), np.ascontiguousarray(gy), operator)


def gradient_channels(rgb, operator: str = "sobel", border="reflect"):
    return tuple(gradient(ch, operator, border) for ch in split_channels(as_rgb(rgb)))


def gradient_value(rgb, operator: str = "sobel", border="reflect") -> GradientField:
    return gradient(value_channel(rgb), operator, border)


def hybrid_gradient(img, kind: str = "scharr_sobel", border="reflect") -> GradientField:
    """Scharr horizontal derivative paired with a Sobel or Prewitt vertical one."""
    second = {"scharr_sobel": "sobel", "scharr_prewitt": "prewitt"}.get(kind)
    if second is None:
        raise ValueError(f"unknown hybrid {kind!r}")
    arr = as_gray(img)
    gx = gradient(arr, "scharr", border).gx
    gy = gradient(arr, second, border).gy
    return GradientField(gx, gy, kind)


def edge_kernel(family: str, theta: float = 0.0, radius=None, **params):
    """Zero-mean oriented kernel for ``gabor``, ``lmak`` or ``pvmak``."""
    if family == "gabor":
        sigma = params.get("sigma", 2.0)
        return gabor_kernel(sigma, params.get("wavelength", 4.0 * sigma), theta, radius)
    if family == "lmak":
        return lmak_kernel(params.get("gamma", 2.0), radius, theta, params.get("steepness", 1.0))
    if family == "pvmak":
        pv = pseudo_voigt_mix(params.get("f_gaussian", 4.0), params.get("f_lorentzian", 4.0))
        return pvmak_kernel(pv, radius, theta, params.get("steepness", 1.0))
    raise ValueError(f"unknown kernel family {family!r}")


def kernel_edge_response(img, family: str, theta: float = 0.0, orientations: int = 1,
                         radius=None, border="reflect", **params) -> np.ndarray:
    """Absolute response to an oriented zero-mean kernel.

    With ``orientations > 1`` the kernel is turned through
    ``theta + i*pi/orientations`` and the per-pixel maximum is kept.
    """
    if orientations < 1:
        raise ValueError("orientations must be >= 1")
    arr = as_gray(img)
    best = None
    for i in range(orientations):
        k = edge_kernel(family, theta + i * math.pi / orientations, radius, **params)
        resp = np.abs(convolve(arr, k, border))
        best = resp if best is None else np.maximum(best, resp)
    return best


def non_max_suppression(field: GradientField) -> np.ndarray:
    """Thin ridges along the gradient direction quantized to 0/45/90/135 degrees.

    A pixel survives when its magnitude is positive, at least that of the
    neighbour behind it and strictly greater than the neighbour ahead of it.
    The asymmetric tie rule keeps exactly one pixel of a symmetric ridge.
    """
    mag = np.ascontiguousarray(field.magnitude)
    keep = _backend.kernels().nms(mag, np.ascontiguousarray(field.gx), np.ascontiguousarray(field.gy))
    return np.asarray(keep, dtype=bool)


def hysteresis(candidates, magnitude, low, high) -> np.ndarray:
    weak = candidates & (magnitude >= low)
    strong = weak & (magnitude >= high)
    labels, n = connected_components(weak, 8)
    if n == 0:
        return np.zeros_like(weak)
    hit = np.zeros(n + 1, dtype=bool)
    hit[labels[strong]] = True
    hit[0] = False
    return hit[labels]


def _smoothed_sobel(img, sigma, border):
    arr = as_gray(img)
    smooth = gaussian_blur(arr, sigma, border) if sigma > 0 else arr
    return gradient(smooth, "sobel", border)


def canny(img, sigma: float = 1.0, low: float = 0.1, high: float = 0.2, border="reflect") -> EdgeMap:
    """Canny edges: blur, Sobel, non-maximum suppression, hysteresis.

    ``low``/``high`` are in Sobel magnitude units. Weak pixels
    (``>= low``) survive only when 8-connected to a strong one (``>= high``).
    """
    if low < 0 or low > high:
        raise ValueError(f"need 0 <= low <= high, got low={low}, high={high}")
    field = _smoothed_sobel(img, sigma, border)
    mask = hysteresis(non_max_suppression(field), field.magnitude, low, high)
    return EdgeMap(mask, float(low), float(high))


def magnitude_otsu(magnitude):
    """Otsu cut on the magnitude histogram, scaled back to magnitude units."""
    mag = np.asarray(magnitude, dtype=np.float64)
    top = float(mag.max())
    if not top > 0 or float(mag.min()) == top:
        raise ValueError("gradient magnitude is constant; Otsu threshold undefined")
    idx = np.clip(np.floor(mag / top * 256.0), 0, 255).astype(np.intp)
    res = otsu_from_histogram(np.bincount(idx.ravel(), minlength=256))
    return res.threshold * top


def canny_otsu(img, sigma: float = 1.0, border="reflect") -> EdgeMap:
    """Canny with ``high`` from Otsu on the gradient magnitude and ``low = high/2``."""
    field = _smoothed_sobel(img, sigma, border)
    high = magnitude_otsu(field.magnitude)
    return canny(img, sigma, 0.5 * high, high, border)
