"""Smoothing filters and the salt-and-pepper noise injector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .kernels import MIN_WIDTH, BorderPolicy, convolve_separable, default_radius, gaussian_profile_1d
from .raster import as_gray

# recorded alongside pipeline outputs so noisy runs can be reproduced
NOISE_RNG = "numpy-philox4x64-10"


@dataclass(frozen=True)
class BilateralParams:
    sigma_spatial: float = 3.0
    sigma_range: float = 0.1
    radius: int | None = None

    def __post_init__(self):
        if not self.sigma_spatial >= MIN_WIDTH or not self.sigma_range >= MIN_WIDTH:
            raise ValueError(f"bilateral sigmas must be >= {MIN_WIDTH:g}")
        if self.radius is not None and self.radius < 1:
            raise ValueError("bilateral radius must be >= 1")

    @property
    def window_radius(self) -> int:
        return default_radius(self.sigma_spatial) if self.radius is None else int(self.radius)


@dataclass(frozen=True)
class NoiseSpec:
    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"noise probability must lie in [0, 1], got {self.p}")


def gaussian_blur(img, sigma: float, border="reflect", radius: int | None = None) -> np.ndarray:
    """Gaussian smoothing with a normalized kernel of radius ``ceil(3 sigma)``.

    Runs as two 1-D passes; the outer product of the normalized 1-D taps is
    exactly the normalized 2-D kernel.
    """
    taps = gaussian_profile_1d(sigma, radius)
    return convolve_separable(img, taps, taps, border)


def _check_radius(radius):
    if int(radius) != radius or radius < 1:
        raise ValueError(f"radius must be an integer >= 1, got {radius}")
    return int(radius)


def median_blur(img, radius: int, border="reflect") -> np.ndarray:
    """Median over the ``(2r+1)^2`` window.

    The window is ranked over 256 quantized levels, which is exact for
    8-bit-sourced images; the output is the median level divided by 255.
    """
    r = _check_radius(radius)
    arr = as_gray(img)
    q = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    padded = np.ascontiguousarray(BorderPolicy.parse(border).pad(q, r))
    out = np.empty(arr.shape, dtype=np.uint8)
    _backend.run_rows("median_rows", out, padded, r)
    return out.astype(np.float64) / 255.0


def _is_8bit(arr) -> bool:
    q = np.rint(arr * 255.0)
    return bool(np.all(q / 255.0 == arr))


def _box_sums(values, r, border):
    padded = BorderPolicy.parse(border).pad(values, r)
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=values.dtype)
    integral[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    k = 2 * r + 1
    h, w = values.shape
    return (integral[k:k + h, k:k + w] - integral[0:h, k:k + w]
            - integral[k:k + h, 0:w] + integral[0:h, 0:w])


def mean_blur(img, radius: int, border="reflect") -> np.ndarray:
    """Arithmetic mean over the ``(2r+1)^2`` window via an integral image.

    8-bit-sourced images are summed in exact integer arithmetic, so the
    result is the correctly rounded window mean.
    """
    r = _check_radius(radius)
    arr = as_gray(img)
    n = (2 * r + 1) ** 2
    if _is_8bit(arr):
        raw = np.rint(arr * 255.0).astype(np.int64)
        return _box_sums(raw, r, border).astype(np.float64) / float(n * 255)
    return _box_sums(arr, r, border) / float(n)


def bilateral(img, params: BilateralParams | None = None, border="reflect") -> np.ndarray:
    """Edge-preserving bilateral filter with Gaussian range and spatial weights.

    Weights are normalised by ``sum f_r * g_s`` so constant regions are fixed
    points.
    """
    params = params or BilateralParams()
    arr = as_gray(img)
    r = params.window_radius
    k = np.arange(-r, r + 1, dtype=np.float64)
    dy, dx = np.meshgrid(k, k, indexing="ij")
    spatial = np.exp(-(dx * dx + dy * dy) / (2.0 * params.sigma_spatial ** 2))
    inv = 1.0 / (2.0 * params.sigma_range ** 2)
    padded = np.ascontiguousarray(BorderPolicy.parse(border).pad(arr, r))
    out = np.empty(arr.shape)
    return _backend.run_rows("bilateral_rows", out, padded, spatial, inv)


def add_salt_pepper(img, spec: NoiseSpec) -> np.ndarray:
    """Corrupt each pixel with probability ``p``: half to 0, half to 1.

    Pixel ``(x, y)`` consumes draw number ``y * width + x`` of a Philox
    counter-based stream keyed by the seed.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape[:2]
    rng = np.random.Generator(np.random.Philox(key=int(spec.seed) & (2 ** 64 - 1)))
    u = rng.random((h, w))
    out = arr.copy()
    pepper = u < spec.p / 2.0
    salt = ~pepper & (u < spec.p)
    out[pepper] = 0.0
    out[salt] = 1.0
    return out


def laplacian_energy(img) -> float:
    """Sum of squared 5-point Laplacian over the interior; a roughness measure."""
    arr = as_gray(img)
    lap = (arr[1:-1, :-2] + arr[1:-1, 2:] + arr[:-2, 1:-1] + arr[2:, 1:-1]
           - 4.0 * arr[1:-1, 1:-1])
    return float(np.sum(lap * lap))
