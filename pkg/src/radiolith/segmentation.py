"""Thresholding and region segmentation producing integer label maps.

A label map is an ``int32`` array the shape of the image. Final outputs use
labels ``1..n`` and cover every pixel; ``0`` only appears in watershed
marker inputs, where it means "unassigned".
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _backend
from .denoise import gaussian_blur
from .morphology import StructuringElement, morph_gradient
from .raster import as_gray, histogram


class OtsuResult(NamedTuple):
    threshold: float  # bin boundary cut/256; foreground is intensity > threshold
    level: int  # same cut on the 0..255 scale: foreground is byte value > level
    between_class_variance: float


@dataclass(frozen=True)
class SlicParams:
    n_segments: int = 100
    compactness: float = 0.1
    max_iter: int = 10
    seed: int | None = None

    def __post_init__(self):
        if self.n_segments < 1:
            raise ValueError("n_segments must be >= 1")
        if not self.compactness > 0:
            raise ValueError("compactness must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class FelzParams:
    scale: float = 1.0
    sigma: float = 0.8
    min_size: int = 20

    def __post_init__(self):
        if not self.scale > 0 or not self.sigma > 0 or self.min_size < 1:
            raise ValueError("felzenszwalb parameters must all be positive")


def n_labels(labels) -> int:
    labels = np.asarray(labels)
    return int(np.unique(labels[labels > 0]).size)


def relabel_sequential(labels) -> np.ndarray:
    """Renumber positive labels to 1..n in raster order of first appearance."""
    flat = np.asarray(labels).ravel()
    uniq, first = np.unique(flat, return_index=True)
    keep = uniq > 0
    uniq, first = uniq[keep], first[keep]
    order = np.argsort(first, kind="stable")
    lut = np.zeros(int(flat.max(initial=0)) + 1, dtype=np.int32)
    lut[uniq[order]] = np.arange(1, uniq.size + 1, dtype=np.int32)
    out = np.where(flat > 0, lut[np.maximum(flat, 0)], 0)
    return out.reshape(np.shape(labels)).astype(np.int32)


def connected_components(mask, connectivity: int = 8):
    """Label connected foreground regions; numbering follows raster order."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    m = np.ascontiguousarray(np.asarray(mask, dtype=bool), dtype=np.uint8)
    labels, n = _backend.kernels().label_components(m, connectivity)
    return np.asarray(labels, dtype=np.int32), int(n)


def threshold(img, t: float) -> np.ndarray:
    """Label 2 where intensity exceeds ``t``, 1 elsewhere."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {t}")
    arr = as_gray(img)
    return np.where(arr > t, 2, 1).astype(np.int32)


def otsu_from_histogram(bins) -> OtsuResult:
    """Otsu cut maximizing between-class variance over a 256-bin histogram.

    Scores are compared as exact integer ratios
    ``(N*S0 - n0*S)^2 / (n0*n1)``, so the argmax and its tie-break (lowest
    cut wins) do not depend on floating-point rounding.
    """
    counts = [int(c) for c in bins]
    if len(counts) != 256:
        raise ValueError("Otsu needs a 256-bin histogram")
    if sum(1 for c in counts if c) < 2:
        raise ValueError("Otsu threshold is undefined for a histogram with fewer than two occupied bins")
    total = sum(counts)
    total_sum = sum(i * c for i, c in enumerate(counts))
    best_cut, best_num, best_den = 0, -1, 1
    n0 = s0 = 0
    for cut in range(1, 256):
        n0 += counts[cut - 1]
        s0 += (cut - 1) * counts[cut - 1]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            num, den = 0, 1
        else:
            diff = total * s0 - n0 * total_sum
            num, den = diff * diff, n0 * n1
        if num * best_den > best_num * den:
            best_cut, best_num, best_den = cut, num, den
    variance = best_num / (best_den * total * total * 65536.0)
    return OtsuResult(best_cut / 256.0, best_cut - 1, variance)


def otsu(img) -> OtsuResult:
    return otsu_from_histogram(histogram(img).bins)


def kmeans_1d(values, weights, k: int, seed: int = 0, tol: float = 1e-4, max_iter: int = 300):
    """Weighted 1-D Lloyd iterations with k-means++ seeding.

    Returns ``(centers, assignment, inertia_history)``; centers come back
    sorted ascending with the assignment remapped to match.
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    rng = np.random.default_rng(seed)
    p = weights / weights.sum()
    centers = [values[rng.choice(values.size, p=p)]]
    for _ in range(1, k):
        d2 = np.min((values[:, None] - np.array(centers)[None, :]) ** 2, axis=1) * weights
        if d2.sum() <= 0:
            raise ValueError("k exceeds the number of distinct intensities")
        centers.append(values[rng.choice(values.size, p=d2 / d2.sum())])
    centers = np.array(centers)
    history = []
    assign = np.zeros(values.size, dtype=np.intp)
    for _ in range(max_iter):
        d = (values[:, None] - centers[None, :]) ** 2
        assign = np.argmin(d, axis=1)
        history.append(float(np.sum(d[np.arange(values.size), assign] * weights)))
        new = centers.copy()
        for c in range(k):
            sel = assign == c
            if np.any(sel):
                new[c] = np.sum(values[sel] * weights[sel]) / np.sum(weights[sel])
        shift = float(np.max(np.abs(new - centers)))
        centers = new
        if shift < tol:
            break
    d = (values[:, None] - centers[None, :]) ** 2
    assign = np.argmin(d, axis=1)
    history.append(float(np.sum(d[np.arange(values.size), assign] * weights)))
    order = np.argsort(centers, kind="stable")
    rank = np.empty(k, dtype=np.intp)
    rank[order] = np.arange(k)
    return centers[order], rank[assign], history


def kmeans_intensity(img, k: int, seed: int = 0) -> np.ndarray:
    """Cluster pixel intensities; label 1 is the darkest cluster."""
    arr = as_gray(img)
    if k < 1:
        raise ValueError("k must be >= 1")
    values, inverse, counts = np.unique(arr.ravel(), return_inverse=True, return_counts=True)
    if k > values.size:
        raise ValueError(f"k={k} exceeds the {values.size} distinct intensities")
    _, assign, _ = kmeans_1d(values, counts, k, seed)
    return (assign[inverse] + 1).reshape(arr.shape).astype(np.int32)


def watershed(gradient_img, markers, connectivity: int = 8) -> np.ndarray:
    """Priority-flood watershed from labelled markers.

    Pixels are flooded in ascending gradient order (insertion order breaks
    ties); each takes the label of the basin that reaches it first.
    """
    grad = np.ascontiguousarray(as_gray(gradient_img))
    m = np.ascontiguousarray(markers, dtype=np.int32)
    if m.shape != grad.shape:
        raise ValueError(f"marker shape {m.shape} does not match image shape {grad.shape}")
    if not np.any(m > 0):
        raise ValueError("watershed needs at least one labelled marker pixel")
    if np.any(m < 0):
        raise ValueError("marker labels must be non-negative")
    return np.asarray(_backend.kernels().watershed(grad, m, connectivity), dtype=np.int32)


def auto_markers(img, percentile: float = 10.0, gradient=None) -> np.ndarray:
    """Markers from connected low-gradient areas.

    The morphological gradient with a radius-1 disk is thresholded at its
    ``percentile``-th value; 8-connected components of the pixels at or
    below it become markers ``1..n``.
    """
    if not 0.0 < percentile < 100.0:
        raise ValueError("percentile must lie strictly between 0 and 100")
    grad = morph_gradient(img, StructuringElement.disk(1)) if gradient is None else as_gray(gradient)
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient contains non-finite values")
    cut = np.percentile(grad, percentile)
    labels, _ = connected_components(grad <= cut, 8)
    return labels


def _component_adjacency(labels):
    """Pairs of distinct 4-adjacent labels (each unordered pair once)."""
    pairs = []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        pairs.append(np.stack([a[diff], b[diff]], axis=1))
    p = np.concatenate(pairs)
    p = np.sort(p, axis=1)
    return np.unique(p, axis=0)


def _merge_regions(comp, keep, means, sizes):
    """Fold every region not in ``keep`` into an adjacent kept region.

    Orphans are absorbed smallest first by the adjacent kept region with
    the closest mean intensity (lower id on ties).
    """
    n = keep.size - 1
    owner = np.arange(n + 1)
    adj = _component_adjacency(comp)
    neighbors = [[] for _ in range(n + 1)]
    for a, b in adj.tolist():
        neighbors[a].append(b)
        neighbors[b].append(a)
    pending = [c for c in np.argsort(sizes[1:], kind="stable") + 1 if not keep[c]]
    while pending:
        progressed = False
        rest = []
        for c in pending:
            cands = sorted({owner[nb] for nb in neighbors[c] if keep[owner[nb]]})
            if not cands:
                rest.append(c)
                continue
            target = min(cands, key=lambda t: (abs(means[t] - means[c]), t))
            # orphans touching ``c`` now reach ``target`` through owner[c]
            owner[c] = target
            progressed = True
        pending = rest
        if not progressed:
            # isolated orphans with no kept neighbour: promote the largest
            big = max(pending, key=lambda c: (sizes[c], -c))
            keep[big] = True
            pending.remove(big)
    # resolve chains
    for c in range(1, n + 1):
        t = c
        while owner[t] != t:
            t = owner[t]
        owner[c] = t
    return owner


def slic(img, params: SlicParams | None = None) -> np.ndarray:
    """SLIC superpixels on (intensity, y, x) with 4-connected output segments.

    Centers start on a pixel-centred grid with spacing ``S = sqrt(N / n)``;
    the assignment distance is ``sqrt(dc^2 + (ds / S)^2 m^2)`` searched over
    a ``2S x 2S`` window. Afterwards every label keeps only its largest
    4-connected piece; the other pieces merge into an adjacent segment.
    """
    params = params or SlicParams()
    arr = as_gray(img)
    h, w = arr.shape
    if params.n_segments > arr.size:
        raise ValueError("n_segments exceeds the pixel count")
    spacing = float(np.sqrt(arr.size / params.n_segments))
    ny = max(1, int(np.floor(h / spacing + 0.5)))
    nx = max(1, int(np.floor(w / spacing + 0.5)))
    cy = (np.arange(ny) + 0.5) * h / ny - 0.5
    cx = (np.arange(nx) + 0.5) * w / nx - 0.5
    gy, gx = np.meshgrid(cy, cx, indexing="ij")
    gy, gx = gy.ravel(), gx.ravel()
    if params.seed is not None:
        # optional jitter of the seed grid, at most a quarter cell
        rng = np.random.default_rng(params.seed)
        gy = np.clip(gy + rng.uniform(-0.25, 0.25, gy.size) * spacing, 0, h - 1)
        gx = np.clip(gx + rng.uniform(-0.25, 0.25, gx.size) * spacing, 0, w - 1)
    iy = np.clip(np.rint(gy).astype(int), 0, h - 1)
    ix = np.clip(np.rint(gx).astype(int), 0, w - 1)
    centers = np.stack([arr[iy, ix], gy, gx], axis=1)
    assign = _backend.kernels().slic_assign(np.ascontiguousarray(arr), centers, spacing,
                                            float(params.compactness), int(params.max_iter))
    assign = np.asarray(assign, dtype=np.int64) + 1
    return _enforce_connectivity(arr, assign, max_segments=2 * params.n_segments)


def _split_components(labels):
    """Split a label map into 4-connected pieces numbered in raster order."""
    out = np.zeros(labels.shape, dtype=np.int64)
    offset = 0
    for lab in np.unique(labels):
        comp, n = connected_components(labels == lab, 4)
        out[comp > 0] = comp[comp > 0] + offset
        offset += n
    return relabel_sequential(out).astype(np.int64)


def _enforce_connectivity(arr, assign, max_segments):
    comp = _split_components(assign)
    n = int(comp.max())
    sizes = np.bincount(comp.ravel(), minlength=n + 1)
    means = np.bincount(comp.ravel(), weights=arr.ravel(), minlength=n + 1) / np.maximum(sizes, 1)
    # each original label keeps only its largest piece
    keep = np.zeros(n + 1, dtype=bool)
    _, first = np.unique(comp.ravel(), return_index=True)
    origin = assign.ravel()[first]
    best = {}
    for c in range(1, n + 1):
        lab = int(origin[c - 1])
        if lab not in best or sizes[c] > sizes[best[lab]]:
            best[lab] = c
    keep[list(best.values())] = True
    owner = _merge_regions(comp, keep, means, sizes)
    merged = owner[comp]
    out = relabel_sequential(merged)
    while int(out.max()) > max_segments:
        n = int(out.max())
        sizes = np.bincount(out.ravel(), minlength=n + 1)
        means = np.bincount(out.ravel(), weights=arr.ravel(), minlength=n + 1) / np.maximum(sizes, 1)
        keep = np.ones(n + 1, dtype=bool)
        keep[0] = False
        keep[int(np.argmin(np.where(np.arange(n + 1) == 0, np.iinfo(np.int64).max, sizes)))] = False
        out = relabel_sequential(_merge_regions(out, keep, means, sizes)[out])
    return out


def _grid_edges(h, w):
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    pairs = [
        (idx[:, :-1], idx[:, 1:]),  # right
        (idx[:-1, :], idx[1:, :]),  # down
        (idx[:-1, :-1], idx[1:, 1:]),  # down-right
        (idx[:-1, 1:], idx[1:, :-1]),  # down-left
    ]
    ea = np.concatenate([a.ravel() for a, _ in pairs])
    eb = np.concatenate([b.ravel() for _, b in pairs])
    return ea, eb


def felzenszwalb(img, params: FelzParams | None = None) -> np.ndarray:
    """Graph-based segmentation on the 8-connected pixel grid.

    Edges are merged in ascending weight order while
    ``w <= min(Int(C1) + k/|C1|, Int(C2) + k/|C2|)``; afterwards components
    under ``min_size`` absorb into the neighbour across their cheapest edge.
    """
    params = params or FelzParams()
    arr = as_gray(img)
    h, w = arr.shape
    smooth = gaussian_blur(arr, params.sigma)
    ea, eb = _grid_edges(h, w)
    flat = smooth.ravel()
    weights = np.abs(flat[ea] - flat[eb])
    order = np.argsort(weights, kind="stable")
    ea, eb, weights = (np.ascontiguousarray(v[order]) for v in (ea, eb, weights))
    roots = _backend.kernels().felzenszwalb_merge(h * w, ea, eb, weights, float(params.scale),
                                                  int(params.min_size))
    roots = np.asarray(roots, dtype=np.int64).reshape(h, w) + 1
    return relabel_sequential(roots)


def threshold_mask_apply(img, mask, target_label: int) -> np.ndarray:
    arr = as_gray(img)
    mask = np.asarray(mask)
    if mask.shape != arr.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image shape {arr.shape}")
    return np.where(mask == target_label, arr, 0.0)


def label_boundaries(labels) -> np.ndarray:
    """Pixels with a 4-neighbour carrying a different label."""
    labels = np.asarray(labels)
    edge = np.zeros(labels.shape, dtype=bool)
    dh = labels[:, :-1] != labels[:, 1:]
    dv = labels[:-1, :] != labels[1:, :]
    edge[:, :-1] |= dh
    edge[:, 1:] |= dh
    edge[:-1, :] |= dv
    edge[1:, :] |= dv
    return edge


def label_stats(labels, img):
    """Rows of ``(label, pixel_count, mean_intensity)`` for labels 1..n."""
    labels = np.asarray(labels)
    arr = as_gray(img)
    n = int(labels.max(initial=0))
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    sums = np.bincount(labels.ravel(), weights=arr.ravel(), minlength=n + 1)
    return [(lab, int(counts[lab]), float(sums[lab] / counts[lab]))
            for lab in range(1, n + 1) if counts[lab]]


def labels_to_image(labels) -> np.ndarray:
    """Spread labels over the gray range for viewing (label n maps to 1.0)."""
    labels = np.asarray(labels)
    top = max(int(labels.max(initial=0)), 1)
    return labels.astype(np.float64) / top
