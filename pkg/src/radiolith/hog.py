"""Histogram of oriented gradients.

Defaults follow the usual pedestrian-detection setup: 8-pixel cells,
2x2-cell blocks with a one-cell stride, 9 unsigned orientation bins over
[0, 180) degrees and L2-Hys block normalization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import as_gray


@dataclass(frozen=True)
class HogSpec:
    cell_size: int = 8
    block_size: int = 2
    n_bins: int = 9
    block_stride: int = 1
    clip: float = 0.2
    eps: float = 1e-5

    def __post_init__(self):
        if self.cell_size < 2 or self.n_bins < 2 or self.block_size < 1 or self.block_stride < 1:
            raise ValueError("invalid HOG geometry")

    def grid(self, shape):
        """(cells_y, cells_x, blocks_y, blocks_x) for an image of ``shape``."""
        cy, cx = shape[0] // self.cell_size, shape[1] // self.cell_size
        if cy < self.block_size or cx < self.block_size:
            raise ValueError(f"image {shape} is smaller than one {self.block_size}x{self.block_size}-cell block")
        by = (cy - self.block_size) // self.block_stride + 1
        bx = (cx - self.block_size) // self.block_stride + 1
        return cy, cx, by, bx

    def descriptor_length(self, shape) -> int:
        _, _, by, bx = self.grid(shape)
        return by * bx * self.block_size ** 2 * self.n_bins


def _gradients(arr):
    p = np.pad(arr, 1, mode="symmetric")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx, gy


def cell_histograms(img, spec: HogSpec | None = None) -> np.ndarray:
    """Unnormalized per-cell orientation histograms, shape (cells_y, cells_x, n_bins).

    Each pixel's magnitude is split linearly between the two nearest bin
    centres (circularly), so a cell's bins sum to its total magnitude.
    """
    spec = spec or HogSpec()
    arr = as_gray(img)
    cy, cx, _, _ = spec.grid(arr.shape)
    gx, gy = _gradients(arr)
    h, w = cy * spec.cell_size, cx * spec.cell_size
    gx, gy = gx[:h, :w], gy[:h, :w]
    mag = np.sqrt(gx * gx + gy * gy)
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    width = 180.0 / spec.n_bins
    pos = angle / width - 0.5
    lo = np.floor(pos)
    frac = pos - lo
    b0 = np.mod(lo.astype(np.int64), spec.n_bins)
    b1 = np.mod(b0 + 1, spec.n_bins)
    cell = (np.arange(h)[:, None] // spec.cell_size) * cx + (np.arange(w)[None, :] // spec.cell_size)
    hist = np.zeros(cy * cx * spec.n_bins)
    np.add.at(hist, (cell * spec.n_bins + b0).ravel(), (mag * (1.0 - frac)).ravel())
    np.add.at(hist, (cell * spec.n_bins + b1).ravel(), (mag * frac).ravel())
    return hist.reshape(cy, cx, spec.n_bins)


def _l2hys(v, clip, eps):
    v = v / math.sqrt(float(np.dot(v, v)) + eps * eps)
    v = np.minimum(v, clip)
    return v / math.sqrt(float(np.dot(v, v)) + eps * eps)


def normalize_blocks(cells: np.ndarray, spec: HogSpec) -> np.ndarray:
    cy, cx, nb = cells.shape
    bs, st = spec.block_size, spec.block_stride
    by = (cy - bs) // st + 1
    bx = (cx - bs) // st + 1
    out = np.empty((by, bx, bs, bs, nb))
    for i in range(by):
        for j in range(bx):
            block = cells[i * st:i * st + bs, j * st:j * st + bs].ravel()
            out[i, j] = _l2hys(block, spec.clip, spec.eps).reshape(bs, bs, nb)
    return out


def hog(img, spec: HogSpec | None = None) -> np.ndarray:
    """Flattened descriptor laid out (blocks_y, blocks_x, block, block, bins)."""
    spec = spec or HogSpec()
    return normalize_blocks(cell_histograms(img, spec), spec).ravel()


def descriptor_cells(descriptor, spec: HogSpec, shape) -> np.ndarray:
    """Average each cell's normalized bins over the blocks that contain it."""
    cy, cx, by, bx = spec.grid(shape)
    bs, st, nb = spec.block_size, spec.block_stride, spec.n_bins
    blocks = np.asarray(descriptor, dtype=np.float64).reshape(by, bx, bs, bs, nb)
    acc = np.zeros((cy, cx, nb))
    hits = np.zeros((cy, cx, 1))
    for i in range(by):
        for j in range(bx):
            acc[i * st:i * st + bs, j * st:j * st + bs] += blocks[i, j]
            hits[i * st:i * st + bs, j * st:j * st + bs] += 1
    return acc / np.maximum(hits, 1)


def hog_render(descriptor, spec: HogSpec, shape) -> np.ndarray:
    """Star-plot rendering: one stroke per bin through each cell centre.

    A stroke is drawn at its bin's orientation with brightness proportional
    to the bin value (the global maximum maps to 1). The canvas covers the
    full cells only.
    """
    cells = descriptor_cells(descriptor, spec, shape)
    cy, cx, nb = cells.shape
    cs = spec.cell_size
    canvas = np.zeros((cy * cs, cx * cs))
    top = cells.max()
    if not top > 0:
        return canvas
    half = cs / 2.0 - 0.5
    ts = np.linspace(-half, half, 4 * cs)
    for b in range(nb):
        theta = math.radians((b + 0.5) * 180.0 / nb)
        # rows grow downward, so the vertical offset flips sign
        ox = np.rint(ts * math.cos(theta)).astype(int)
        oy = np.rint(-ts * math.sin(theta)).astype(int)
        for i in range(cy):
            for j in range(cx):
                v = cells[i, j, b] / top
                if v <= 0:
                    continue
                yc, xc = i * cs + cs // 2, j * cs + cs // 2
                ys = np.clip(yc + oy, i * cs, (i + 1) * cs - 1)
                xs = np.clip(xc + ox, j * cs, (j + 1) * cs - 1)
                canvas[ys, xs] = np.maximum(canvas[ys, xs], v)
    return canvas


def descriptor_to_csv(descriptor) -> str:
    return ",".join(repr(float(v)) for v in descriptor) + "\n"
