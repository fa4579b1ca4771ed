"""Grayscale morphology over binary structuring elements.

Dilation takes ``max_b f(x - b)`` and erosion ``min_b f(x + b)`` over the
element's offsets ``b``, the standard pair for which opening and closing
are idempotent and the duality ``erode(f, B) = 1 - dilate(1 - f, -B)``
holds exactly. Borders are reflected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .kernels import BorderPolicy
from .raster import as_gray


@dataclass(frozen=True)
class StructuringElement:
    mask: np.ndarray

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.ndim != 2 or m.shape[0] % 2 == 0 or m.shape[1] % 2 == 0:
            raise ValueError(f"structuring element needs an odd bounding box, got {m.shape}")
        if not m[m.shape[0] // 2, m.shape[1] // 2]:
            raise ValueError("structuring element must contain its origin")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def square(cls, size: int) -> "StructuringElement":
        if size < 1 or size % 2 == 0:
            raise ValueError("square element size must be a positive odd integer")
        return cls(np.ones((size, size), dtype=bool))

    @classmethod
    def disk(cls, radius: int) -> "StructuringElement":
        """Closed disk: offsets with ``dx^2 + dy^2 <= r^2``."""
        if radius < 0:
            raise ValueError("disk radius must be >= 0")
        r = np.arange(-radius, radius + 1)
        dy, dx = np.meshgrid(r, r, indexing="ij")
        return cls(dx * dx + dy * dy <= radius * radius)

    @classmethod
    def from_spec(cls, spec) -> "StructuringElement":
        """Build from ``{"shape": "square" | "disk", "size": k}``."""
        if isinstance(spec, StructuringElement):
            return spec
        shape = spec.get("shape", "square")
        size = int(spec.get("size", 3))
        if shape == "square":
            return cls.square(size)
        if shape == "disk":
            return cls.disk(size)
        raise ValueError(f"unknown structuring element shape {shape!r}")

    def rotated(self) -> "StructuringElement":
        """180 degree point reflection about the origin."""
        return StructuringElement(self.mask[::-1, ::-1])

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.mask, self.mask[::-1, ::-1]))


def _rank(img, mask, is_max, border):
    arr = as_gray(img)
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    padded = np.ascontiguousarray(BorderPolicy.parse(border).pad(arr, m.shape[0] // 2, m.shape[1] // 2))
    out = np.empty(arr.shape)
    return _backend.run_rows("minmax_rows", out, padded, m, bool(is_max))


def dilate(img, se: StructuringElement, border="reflect") -> np.ndarray:
    # the backend reads f(x + o); dilation needs f(x - b), i.e. the reflected mask
    return _rank(img, se.mask[::-1, ::-1], True, border)


def erode(img, se: StructuringElement, border="reflect") -> np.ndarray:
    return _rank(img, se.mask, False, border)


def _compound(img, first, second, se, border):
    """Apply ``second(first(f))`` to the border-extended image, then crop.

    Extending once by twice the element radius means the intermediate
    result is never re-padded, so the composite matches the operator on
    the infinitely extended image even for asymmetric elements.
    """
    arr = as_gray(img)
    ry, rx = se.mask.shape[0] // 2, se.mask.shape[1] // 2
    ext = BorderPolicy.parse(border).pad(arr, 2 * ry, 2 * rx)
    out = second(first(ext, se, border), se, border)
    return np.ascontiguousarray(out[2 * ry:2 * ry + arr.shape[0], 2 * rx:2 * rx + arr.shape[1]])


def opening(img, se: StructuringElement, border="reflect") -> np.ndarray:
    return _compound(img, erode, dilate, se, border)


def closing(img, se: StructuringElement, border="reflect") -> np.ndarray:
    """Dilate then erode, both with the 180-degree rotated element."""
    return _compound(img, dilate, erode, se.rotated(), border)


def morph_gradient(img, se: StructuringElement, border="reflect") -> np.ndarray:
    return dilate(img, se, border) - erode(img, se, border)


def image_diff(a, b) -> np.ndarray:
    """Absolute difference clamped to [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.clip(np.abs(a - b), 0.0, 1.0)


close = closing
