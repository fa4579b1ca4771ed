"""Kernel construction and the 2-D convolution engine.

Kernels are dense odd-sized weight grids. Gaussian-family kernels default
to radius ``ceil(3 sigma)``. FWHM parameters convert with the usual
spectroscopy conventions: ``sigma = f / (2 sqrt(2 ln 2))`` for a Gaussian and
``gamma = f / 2`` (half width at half maximum) for a Lorentzian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .raster import as_gray

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

# pseudo-Voigt mixing polynomial coefficients
ETA_COEFFS = (1.36606, -0.47719, 0.11116)
# total-width polynomial, terms f_G^5, f_G^4 f_L, f_G^3 f_L^2, f_G f_L^4, f_L^5
FWHM_COEFFS = (1.0, 2.69, 2.42, 0.078, 1.0)
# Smallest accepted width (sigma, gamma, FWHM, wavelength). Narrower
# profiles are already a delta on the pixel grid, and their squares
# underflow long before reaching zero.
MIN_WIDTH = 1e-6


@dataclass(frozen=True)
class Kernel:
    weights: np.ndarray
    normalized: bool = False
    zero_mean: bool = False

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] % 2 == 0 or w.shape[1] % 2 == 0:
            raise ValueError(f"kernel must be 2-D with odd dimensions, got {w.shape}")
        if self.normalized and abs(w.sum() - 1.0) >= 1e-9:
            raise ValueError("kernel flagged normalized does not sum to 1")
        if self.zero_mean and abs(w.sum()) >= 1e-9:
            raise ValueError("kernel flagged zero-mean does not sum to 0")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def radius(self) -> int:
        return self.weights.shape[0] // 2

    def dumps(self) -> str:
        """Text dump: first line ``k``, then ``k`` rows of ``k`` weights."""
        if self.weights.shape[0] != self.weights.shape[1]:
            raise ValueError("only square kernels have a text dump")
        lines = [str(self.size)]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.weights]
        return "\n".join(lines) + "\n"

    def dump(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="ascii")

    @classmethod
    def loads(cls, text: str) -> "Kernel":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        k = int(lines[0])
        rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
        if len(rows) != k or any(len(r) != k for r in rows):
            raise ValueError(f"kernel dump does not hold {k}x{k} weights")
        return cls(np.array(rows))


@dataclass(frozen=True)
class BorderPolicy:
    """How samples beyond the image edge are synthesised.

    ``reflect`` mirrors about the edge with the edge pixel repeated
    (``d c b a | a b c d``), ``replicate`` extends the edge pixel and
    ``constant`` pads with ``value``.
    """

    mode: str = "reflect"
    value: float = 0.0

    def __post_init__(self):
        if self.mode not in ("reflect", "replicate", "constant"):
            raise ValueError(f"unknown border mode {self.mode!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("constant border value must lie in [0, 1]")

    @classmethod
    def parse(cls, spec) -> "BorderPolicy":
        if isinstance(spec, BorderPolicy):
            return spec
        if spec is None:
            return cls()
        if isinstance(spec, str):
            if spec.startswith("constant"):
                _, _, val = spec.partition(":")
                return cls("constant", float(val) if val else 0.0)
            return cls(spec)
        mode, value = spec
        return cls(mode, float(value))

    def pad(self, img: np.ndarray, pad_y: int, pad_x: int | None = None) -> np.ndarray:
        if pad_x is None:
            pad_x = pad_y
        widths = ((pad_y, pad_y), (pad_x, pad_x))
        if self.mode == "reflect":
            return np.pad(img, widths, mode="symmetric")
        if self.mode == "replicate":
            return np.pad(img, widths, mode="edge")
        return np.pad(img, widths, mode="constant", constant_values=self.value)


def default_radius(sigma: float) -> int:
    return max(1, math.ceil(3.0 * sigma))


def _grid(radius: int):
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    return dx, dy


def _check_positive(**values):
    for key, val in values.items():
        if not val >= MIN_WIDTH:
            raise ValueError(f"{key} must be >= {MIN_WIDTH:g}, got {val}")


def gaussian_profile_1d(sigma: float, radius: int | None = None) -> np.ndarray:
    """Normalized 1-D Gaussian taps; the outer product is the 2-D kernel."""
    _check_positive(sigma=sigma)
    radius = default_radius(sigma) if radius is None else int(radius)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def gaussian_kernel(sigma: float, radius: int | None = None) -> Kernel:
    _check_positive(sigma=sigma)
    radius = default_radius(sigma) if radius is None else int(radius)
    if radius < 1:
        raise ValueError("radius must be >= 1")
    dx, dy = _grid(radius)
    w = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    return Kernel(w / w.sum(), normalized=True)


def _oriented_offset(dx, dy, theta):
    return dx * math.cos(theta) + dy * math.sin(theta)


def _zero_mean(w: np.ndarray) -> Kernel:
    return Kernel(w - w.mean(), zero_mean=True)


def gabor_kernel(sigma: float, wavelength: float, theta: float = 0.0,
                 radius: int | None = None, raw: bool = False):
    """Odd Gabor kernel: Gaussian envelope times ``sin(2 pi u / wavelength)``.

    ``u`` is the offset along orientation ``theta`` (radians, measured from
    the x axis). With ``raw=True`` the un-centred weight array is returned.
    """
    _check_positive(sigma=sigma, wavelength=wavelength)
    radius = default_radius(sigma) if radius is None else int(radius)
    dx, dy = _grid(radius)
    u = _oriented_offset(dx, dy, theta)
    env = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)) / (2.0 * math.pi * sigma * sigma)
    w = env * np.sin(2.0 * math.pi * u / wavelength)
    return w if raw else _zero_mean(w)


@dataclass(frozen=True)
class PseudoVoigtParams:
    f_gaussian: float
    f_lorentzian: float
    fwhm: float
    eta: float

    @property
    def sigma(self) -> float:
        return self.fwhm * FWHM_TO_SIGMA

    @property
    def gamma(self) -> float:
        return self.fwhm / 2.0


def total_fwhm(f_g: float, f_l: float) -> float:
    a, b, c, d, e = FWHM_COEFFS
    s = (a * f_g ** 5 + b * f_g ** 4 * f_l + c * f_g ** 3 * f_l ** 2
         + d * f_g * f_l ** 4 + e * f_l ** 5)
    return s ** 0.2


def mixing_eta(ratio: float) -> float:
    c1, c2, c3 = ETA_COEFFS
    return c1 * ratio + c2 * ratio ** 2 + c3 * ratio ** 3


def pseudo_voigt_mix(f_g: float, f_l: float) -> PseudoVoigtParams:
    """Total FWHM and Lorentzian fraction of a pseudo-Voigt profile.

    The width polynomial is evaluated with its five printed terms; the
    customary ``4.47163 f_G^2 f_L^3`` term is deliberately absent.
    """
    if f_g < 0 or f_l < 0:
        raise ValueError("FWHM values must be non-negative")
    if f_g + f_l <= 0:
        raise ValueError("at least one FWHM must be positive")
    if 0 < f_g < MIN_WIDTH or 0 < f_l < MIN_WIDTH:
        raise ValueError(f"a nonzero FWHM must be >= {MIN_WIDTH:g}")
    if f_l == 0:
        return PseudoVoigtParams(f_g, f_l, float(f_g), 0.0)
    f = total_fwhm(f_g, f_l)
    if f_g == 0:
        f = float(f_l)
    return PseudoVoigtParams(f_g, f_l, f, mixing_eta(f_l / f))


def lorentzian(rho, gamma: float):
    """Radial Lorentzian ``gamma / (pi (rho^2 + gamma^2))``."""
    rho = np.asarray(rho, dtype=np.float64)
    return gamma / (math.pi * (rho * rho + gamma * gamma))


def gaussian(rho, sigma: float):
    rho = np.asarray(rho, dtype=np.float64)
    return np.exp(-(rho * rho) / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi))


def pseudo_voigt(rho, params: PseudoVoigtParams):
    eta = params.eta
    out = (1.0 - eta) * gaussian(rho, params.sigma)
    if eta != 0.0:
        out = out + eta * lorentzian(rho, params.gamma)
    return out


def _fwhm_radius(fwhm: float) -> int:
    return default_radius(fwhm * FWHM_TO_SIGMA)


def pseudo_voigt_kernel(params: PseudoVoigtParams, radius: int | None = None) -> Kernel:
    radius = _fwhm_radius(params.fwhm) if radius is None else int(radius)
    dx, dy = _grid(radius)
    w = pseudo_voigt(np.hypot(dx, dy), params)
    return Kernel(w / w.sum(), normalized=True)


def arctan_modulated(profile: np.ndarray, dx, dy, theta: float, steepness: float) -> np.ndarray:
    return profile * np.arctan(steepness * _oriented_offset(dx, dy, theta))


def lmak_kernel(gamma: float, radius: int | None = None, theta: float = 0.0,
                steepness: float = 1.0, raw: bool = False):
    """Lorentzian-modulated arctangent kernel."""
    _check_positive(gamma=gamma, steepness=steepness)
    radius = _fwhm_radius(2.0 * gamma) if radius is None else int(radius)
    dx, dy = _grid(radius)
    w = arctan_modulated(lorentzian(np.hypot(dx, dy), gamma), dx, dy, theta, steepness)
    return w if raw else _zero_mean(w)


def pvmak_kernel(params: PseudoVoigtParams, radius: int | None = None, theta: float = 0.0,
                 steepness: float = 1.0, raw: bool = False):
    """Pseudo-Voigt-modulated arctangent kernel."""
    _check_positive(steepness=steepness)
    radius = _fwhm_radius(params.fwhm) if radius is None else int(radius)
    dx, dy = _grid(radius)
    w = arctan_modulated(pseudo_voigt(np.hypot(dx, dy), params), dx, dy, theta, steepness)
    return w if raw else _zero_mean(w)


def _weights(kernel) -> np.ndarray:
    w = kernel.weights if isinstance(kernel, Kernel) else np.asarray(kernel, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] % 2 == 0 or w.shape[1] % 2 == 0:
        raise ValueError(f"kernel must have odd dimensions, got {w.shape}")
    return w


def correlate(img, kernel, border="reflect") -> np.ndarray:
    """Cross-correlation (no kernel flip); output has the input's shape."""
    arr = as_gray(img)
    w = np.ascontiguousarray(_weights(kernel))
    padded = np.ascontiguousarray(BorderPolicy.parse(border).pad(arr, w.shape[0] // 2, w.shape[1] // 2))
    out = np.empty(arr.shape)
    return _backend.run_rows("correlate_rows", out, padded, w)


def convolve(img, kernel, border="reflect") -> np.ndarray:
    """True 2-D convolution; the result is not clamped."""
    w = _weights(kernel)
    return correlate(img, w[::-1, ::-1], border)


def convolve_separable(img, row_taps, col_taps, border="reflect") -> np.ndarray:
    """Convolve with the outer product ``col_taps x row_taps`` in two passes."""
    row = np.asarray(row_taps, dtype=np.float64)[::-1].reshape(1, -1)
    col = np.asarray(col_taps, dtype=np.float64)[::-1].reshape(-1, 1)
    return correlate(correlate(img, row, border), col, border)
