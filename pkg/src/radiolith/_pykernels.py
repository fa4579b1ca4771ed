"""Pure numpy/Python implementations of the hot loops.

Signatures mirror ``_ckernels.pyx`` exactly. Row-parallel kernels fill
``out[row0:row1]`` from a pre-padded input; accumulation order over kernel
taps is row-major so results match the compiled path bit for bit.
"""
import heapq
from collections import deque

import numpy as np

TAN_22_5 = np.sqrt(2.0) - 1.0
TAN_67_5 = np.sqrt(2.0) + 1.0

NEIGHBORS_4 = ((-1, 0), (0, -1), (0, 1), (1, 0))
NEIGHBORS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def correlate_rows(padded, weights, out, row0, row1):
    kh, kw = weights.shape
    w = out.shape[1]
    acc = np.zeros((row1 - row0, w), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            acc += weights[i, j] * padded[row0 + i:row1 + i, j:j + w]
    out[row0:row1] = acc


def minmax_rows(padded, mask, is_max, out, row0, row1):
    kh, kw = mask.shape
    w = out.shape[1]
    reduce = np.maximum if is_max else np.minimum
    acc = None
    for i in range(kh):
        for j in range(kw):
            if not mask[i, j]:
                continue
            tap = padded[row0 + i:row1 + i, j:j + w]
            acc = tap.copy() if acc is None else reduce(acc, tap)
    out[row0:row1] = acc


def median_rows(padded, radius, out, row0, row1):
    k = 2 * radius + 1
    n = k * k
    w = out.shape[1]
    # bound the temporary (rows, w, k*k) buffer
    step = max(1, int(4_000_000 // (w * n)))
    for r in range(row0, row1, step):
        r_end = min(r + step, row1)
        block = padded[r:r_end + 2 * radius]
        win = np.lib.stride_tricks.sliding_window_view(block, (k, k))
        flat = win.reshape(r_end - r, w, n)
        out[r:r_end] = np.partition(flat, n // 2, axis=-1)[..., n // 2]


def bilateral_rows(padded, spatial, inv_two_sr2, out, row0, row1):
    k = spatial.shape[0]
    rad = k // 2
    w = out.shape[1]
    center = padded[row0 + rad:row1 + rad, rad:rad + w]
    num = np.zeros((row1 - row0, w), dtype=np.float64)
    den = np.zeros((row1 - row0, w), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            v = padded[row0 + i:row1 + i, j:j + w]
            d = v - center
            wt = spatial[i, j] * np.exp(-(d * d) * inv_two_sr2)
            num += wt * v
            den += wt
    out[row0:row1] = num / den


def nms(mag, gx, gy):
    h, w = mag.shape
    p = np.zeros((h + 2, w + 2), dtype=np.float64)
    p[1:-1, 1:-1] = mag
    ax = np.abs(gx)
    ay = np.abs(gy)
    horiz = ay < TAN_22_5 * ax
    vert = ~horiz & (ay >= TAN_67_5 * ax)
    diag = ~horiz & ~vert
    d45 = diag & ((gx * gy) > 0)
    d135 = diag & ~d45

    def shifted(dy, dx):
        return p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]

    plus = np.zeros_like(mag)
    minus = np.zeros_like(mag)
    for sel, (dy, dx) in ((horiz, (0, 1)), (vert, (1, 0)), (d45, (1, 1)), (d135, (1, -1))):
        plus[sel] = shifted(dy, dx)[sel]
        minus[sel] = shifted(-dy, -dx)[sel]
    keep = (mag > 0) & (mag > plus) & (mag >= minus)
    return keep.astype(np.uint8)


def label_components(mask, connectivity):
    h, w = mask.shape
    offsets = NEIGHBORS_8 if connectivity == 8 else NEIGHBORS_4
    labels = np.zeros((h, w), dtype=np.int32)
    m = mask.astype(bool)
    n = 0
    queue = deque()
    for y in range(h):
        for x in range(w):
            if not m[y, x] or labels[y, x]:
                continue
            n += 1
            labels[y, x] = n
            queue.append((y, x))
            while queue:
                cy, cx = queue.popleft()
                for dy, dx in offsets:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and m[ny, nx] and not labels[ny, nx]:
                        labels[ny, nx] = n
                        queue.append((ny, nx))
    return labels, n


def watershed(grad, markers, connectivity):
    h, w = grad.shape
    offsets = NEIGHBORS_8 if connectivity == 8 else NEIGHBORS_4
    labels = markers.astype(np.int32).copy()
    g = grad.ravel().tolist()
    lab = labels.ravel()
    heap = []
    counter = 0
    for idx in np.flatnonzero(lab).tolist():
        heap.append((g[idx], counter, idx))
        counter += 1
    heapq.heapify(heap)
    while heap:
        _, _, idx = heapq.heappop(heap)
        y, x = divmod(idx, w)
        cur = lab[idx]
        for dy, dx in offsets:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w:
                q = ny * w + nx
                if lab[q] == 0:
                    lab[q] = cur
                    heapq.heappush(heap, (g[q], counter, q))
                    counter += 1
    return labels


def felzenszwalb_merge(n_vertices, ea, eb, weights, k, min_size):
    parent = list(range(n_vertices))
    rank = [0] * n_vertices
    size = [1] * n_vertices
    thresh = [k] * n_vertices

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def join(a, b):
        if rank[a] > rank[b]:
            a, b = b, a
        parent[a] = b
        size[b] += size[a]
        if rank[a] == rank[b]:
            rank[b] += 1
        return b

    ea_l, eb_l, w_l = ea.tolist(), eb.tolist(), weights.tolist()
    for a, b, wt in zip(ea_l, eb_l, w_l):
        ra, rb = find(a), find(b)
        if ra != rb and wt <= thresh[ra] and wt <= thresh[rb]:
            r = join(ra, rb)
            thresh[r] = wt + k / size[r]
    for a, b in zip(ea_l, eb_l):
        ra, rb = find(a), find(b)
        if ra != rb and (size[ra] < min_size or size[rb] < min_size):
            join(ra, rb)
    return np.array([find(v) for v in range(n_vertices)], dtype=np.int64)


def slic_assign(img, centers, spacing, compactness, max_iter):
    h, w = img.shape
    nc = centers.shape[0]
    centers = centers.copy()
    factor = (compactness * compactness) / (spacing * spacing)
    s = int(np.ceil(spacing))
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]
    labels = np.full((h, w), -1, dtype=np.int32)
    yy = np.broadcast_to(ys, (h, w)).ravel()
    xx = np.broadcast_to(xs, (h, w)).ravel()
    flat = img.ravel()
    for _ in range(max_iter):
        dist = np.full((h, w), np.inf)
        new = np.full((h, w), -1, dtype=np.int32)
        for c in range(nc):
            ci, cy, cx = centers[c]
            y0 = max(int(cy) - s, 0)
            y1 = min(int(cy) + s + 1, h)
            x0 = max(int(cx) - s, 0)
            x1 = min(int(cx) + s + 1, w)
            if y0 >= y1 or x0 >= x1:
                continue
            dc = img[y0:y1, x0:x1] - ci
            dy = ys[y0:y1] - cy
            dx = xs[:, x0:x1] - cx
            d = dc * dc + (dy * dy + dx * dx) * factor
            sub = dist[y0:y1, x0:x1]
            better = d < sub
            sub[better] = d[better]
            new[y0:y1, x0:x1][better] = c
        changed = not np.array_equal(new, labels)
        labels = new
        lab = labels.ravel()
        ok = lab >= 0
        cnt = np.bincount(lab[ok], minlength=nc).astype(np.float64)
        si = np.bincount(lab[ok], weights=flat[ok], minlength=nc)
        sy = np.bincount(lab[ok], weights=yy[ok], minlength=nc)
        sx = np.bincount(lab[ok], weights=xx[ok], minlength=nc)
        nz = cnt > 0
        centers[nz, 0] = si[nz] / cnt[nz]
        centers[nz, 1] = sy[nz] / cnt[nz]
        centers[nz, 2] = sx[nz] / cnt[nz]
        if not changed:
            break
    return labels
