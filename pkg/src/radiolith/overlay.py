"""Colour overlays of edges, blobs and label boundaries on a gray image."""
from __future__ import annotations

import numpy as np

from .raster import as_gray, gray_to_rgb
from .segmentation import label_boundaries

EDGE_COLOR = (1.0, 0.0, 0.0)
BLOB_COLOR = (0.0, 1.0, 0.0)
BOUNDARY_COLOR = (1.0, 1.0, 0.0)


def _base(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    return arr.copy() if arr.ndim == 3 else gray_to_rgb(as_gray(arr))


def _paint(img, mask, color) -> np.ndarray:
    out = _base(img)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != out.shape[:2]:
        raise ValueError(f"overlay shape {mask.shape} does not match image shape {out.shape[:2]}")
    out[mask] = color
    return out


def circle_mask(shape, x: float, y: float, r: float) -> np.ndarray:
    """Pixels whose centre lies within half a pixel of the circle."""
    yy, xx = np.indices(shape[:2], dtype=np.float64)
    return np.abs(np.hypot(xx - x, yy - y) - r) < 0.5


def overlay_edges(img, edges, color=EDGE_COLOR) -> np.ndarray:
    mask = getattr(edges, "mask", edges)
    return _paint(img, mask, color)


def overlay_blobs(img, blobs, color=BLOB_COLOR) -> np.ndarray:
    out = _base(img)
    for b in blobs:
        out[circle_mask(out.shape, b.x, b.y, b.radius)] = color
    return out


def overlay_labels(img, labels, color=BOUNDARY_COLOR) -> np.ndarray:
    return _paint(img, label_boundaries(labels), color)
