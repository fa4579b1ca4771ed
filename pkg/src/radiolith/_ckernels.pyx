# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; signatures mirror ``_pykernels``.

Row-parallel kernels release the GIL and fill ``out[row0:row1]`` so the
dispatcher can hand disjoint row bands to worker threads.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, ceil, INFINITY
from libc.stdlib cimport malloc, free, realloc

cnp.import_array()

cdef double TAN_22_5 = 0.41421356237309503
cdef double TAN_67_5 = 2.414213562373095


def correlate_rows(const double[:, ::1] padded, const double[:, ::1] weights,
                   double[:, ::1] out, Py_ssize_t row0, Py_ssize_t row1):
    cdef Py_ssize_t kh = weights.shape[0], kw = weights.shape[1]
    cdef Py_ssize_t w = out.shape[1]
    cdef Py_ssize_t r, c, i, j
    cdef double wt
    cdef const double *src
    cdef double *dst
    with nogil:
        # tap-major sweeps keep the summation order of the fallback
        for r in range(row0, row1):
            dst = &out[r, 0]
            for c in range(w):
                dst[c] = 0.0
            for i in range(kh):
                for j in range(kw):
                    wt = weights[i, j]
                    src = &padded[r + i, j]
                    for c in range(w):
                        dst[c] = dst[c] + wt * src[c]


def minmax_rows(const double[:, ::1] padded, const unsigned char[:, ::1] mask, bint is_max,
                double[:, ::1] out, Py_ssize_t row0, Py_ssize_t row1):
    cdef Py_ssize_t kh = mask.shape[0], kw = mask.shape[1]
    cdef Py_ssize_t w = out.shape[1]
    cdef Py_ssize_t r, c, t, i, j, n_taps = 0
    cdef Py_ssize_t[:, ::1] taps = np.empty((kh * kw, 2), dtype=np.intp)
    cdef const double *src
    cdef double *dst
    for i in range(kh):
        for j in range(kw):
            if mask[i, j]:
                taps[n_taps, 0] = i
                taps[n_taps, 1] = j
                n_taps += 1
    if n_taps == 0:
        return
    with nogil:
        for r in range(row0, row1):
            dst = &out[r, 0]
            src = &padded[r + taps[0, 0], taps[0, 1]]
            for c in range(w):
                dst[c] = src[c]
            for t in range(1, n_taps):
                src = &padded[r + taps[t, 0], taps[t, 1]]
                if is_max:
                    for c in range(w):
                        dst[c] = src[c] if src[c] > dst[c] else dst[c]
                else:
                    for c in range(w):
                        dst[c] = src[c] if src[c] < dst[c] else dst[c]


def median_rows(const unsigned char[:, :] padded, Py_ssize_t radius,
                unsigned char[:, :] out, Py_ssize_t row0, Py_ssize_t row1):
    cdef Py_ssize_t k = 2 * radius + 1
    cdef Py_ssize_t half = (k * k) // 2
    cdef Py_ssize_t w = out.shape[1]
    cdef Py_ssize_t r, c, i, b, cum
    cdef Py_ssize_t hist[256]
    with nogil:
        for r in range(row0, row1):
            for b in range(256):
                hist[b] = 0
            for i in range(k):
                for c in range(k):
                    hist[padded[r + i, c]] += 1
            for c in range(w):
                if c > 0:
                    # slide: drop column c-1, add column c+k-1
                    for i in range(k):
                        hist[padded[r + i, c - 1]] -= 1
                        hist[padded[r + i, c + k - 1]] += 1
                cum = 0
                for b in range(256):
                    cum = cum + hist[b]
                    if cum > half:
                        break
                out[r, c] = <unsigned char>b


def bilateral_rows(const double[:, :] padded, const double[:, :] spatial,
                   double inv_two_sr2, double[:, :] out,
                   Py_ssize_t row0, Py_ssize_t row1):
    cdef Py_ssize_t k = spatial.shape[0]
    cdef Py_ssize_t rad = k // 2
    cdef Py_ssize_t w = out.shape[1]
    cdef Py_ssize_t r, c, i, j
    cdef double center, v, d, wt, num, den
    with nogil:
        for r in range(row0, row1):
            for c in range(w):
                center = padded[r + rad, c + rad]
                num = 0.0
                den = 0.0
                for i in range(k):
                    for j in range(k):
                        v = padded[r + i, c + j]
                        d = v - center
                        wt = spatial[i, j] * exp(-(d * d) * inv_two_sr2)
                        num = num + wt * v
                        den = den + wt
                out[r, c] = num / den


cdef inline double _at(const double[:, :] m, Py_ssize_t y, Py_ssize_t x,
                       Py_ssize_t h, Py_ssize_t w) nogil:
    if y < 0 or y >= h or x < 0 or x >= w:
        return 0.0
    return m[y, x]


def nms(const double[:, :] mag, const double[:, :] gx, const double[:, :] gy):
    cdef Py_ssize_t h = mag.shape[0], w = mag.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] res = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, :] keep = res
    cdef Py_ssize_t y, x, dy, dx
    cdef double m, ax, ay, plus, minus
    with nogil:
        for y in range(h):
            for x in range(w):
                m = mag[y, x]
                if not m > 0:
                    continue
                ax = fabs(gx[y, x])
                ay = fabs(gy[y, x])
                if ay < TAN_22_5 * ax:
                    dy = 0
                    dx = 1
                elif ay >= TAN_67_5 * ax:
                    dy = 1
                    dx = 0
                elif gx[y, x] * gy[y, x] > 0:
                    dy = 1
                    dx = 1
                else:
                    dy = 1
                    dx = -1
                plus = _at(mag, y + dy, x + dx, h, w)
                minus = _at(mag, y - dy, x - dx, h, w)
                if m > plus and m >= minus:
                    keep[y, x] = 1
    return res


cdef Py_ssize_t _find(Py_ssize_t* parent, Py_ssize_t a) nogil:
    cdef Py_ssize_t root = a, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


def label_components(const unsigned char[:, :] mask, int connectivity):
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    cdef Py_ssize_t n = h * w
    cdef Py_ssize_t* parent = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t y, x, p, q, ra, rb, k
    cdef int dys[4]
    cdef int dxs[4]
    cdef int nback
    # already-visited neighbours in raster order
    dys[0] = 0; dxs[0] = -1
    dys[1] = -1; dxs[1] = 0
    dys[2] = -1; dxs[2] = -1
    dys[3] = -1; dxs[3] = 1
    nback = 4 if connectivity == 8 else 2
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef int[:, :] labels = labels_arr
    cdef int count = 0
    if parent == NULL:
        raise MemoryError()
    try:
        with nogil:
            for p in range(n):
                parent[p] = p
            for y in range(h):
                for x in range(w):
                    if not mask[y, x]:
                        continue
                    p = y * w + x
                    for k in range(nback):
                        if y + dys[k] < 0 or x + dxs[k] < 0 or x + dxs[k] >= w:
                            continue
                        if not mask[y + dys[k], x + dxs[k]]:
                            continue
                        q = (y + dys[k]) * w + x + dxs[k]
                        ra = _find(parent, p)
                        rb = _find(parent, q)
                        if ra != rb:
                            # smaller index stays root: root is the raster-first pixel
                            if ra < rb:
                                parent[rb] = ra
                            else:
                                parent[ra] = rb
            for y in range(h):
                for x in range(w):
                    if not mask[y, x]:
                        continue
                    p = y * w + x
                    ra = _find(parent, p)
                    if ra == p:
                        count += 1
                        labels[y, x] = count
                    else:
                        labels[y, x] = labels[ra // w, ra % w]
    finally:
        free(parent)
    return labels_arr, count


cdef struct HeapItem:
    double value
    long long order
    Py_ssize_t index


cdef inline bint _less(HeapItem a, HeapItem b) nogil:
    if a.value < b.value:
        return True
    if a.value > b.value:
        return False
    return a.order < b.order


def watershed(const double[:, :] grad, const int[:, :] markers, int connectivity):
    cdef Py_ssize_t h = grad.shape[0], w = grad.shape[1]
    cdef Py_ssize_t n = h * w
    labels_arr = np.array(markers, dtype=np.int32, copy=True)
    cdef int[:, :] lab = labels_arr
    cdef int offs_y[8]
    cdef int offs_x[8]
    cdef int noff, t
    if connectivity == 8:
        noff = 8
        offs_y[:] = [-1, -1, -1, 0, 0, 1, 1, 1]
        offs_x[:] = [-1, 0, 1, -1, 1, -1, 0, 1]
    else:
        noff = 4
        offs_y[:4] = [-1, 0, 0, 1]
        offs_x[:4] = [0, -1, 1, 0]
    cdef Py_ssize_t cap = n + 1
    cdef HeapItem* heap = <HeapItem*>malloc(cap * sizeof(HeapItem))
    if heap == NULL:
        raise MemoryError()
    cdef Py_ssize_t size = 0, i, parent_i, child, y, x, ny, nx, q
    cdef long long order = 0
    cdef HeapItem item, top, last
    cdef int cur
    try:
        with nogil:
            for i in range(n):
                y = i // w
                x = i % w
                if lab[y, x] != 0:
                    item.value = grad[y, x]
                    item.order = order
                    item.index = i
                    order += 1
                    # sift up
                    child = size
                    size += 1
                    while child > 0:
                        parent_i = (child - 1) // 2
                        if _less(item, heap[parent_i]):
                            heap[child] = heap[parent_i]
                            child = parent_i
                        else:
                            break
                    heap[child] = item
            while size > 0:
                top = heap[0]
                size -= 1
                if size > 0:
                    last = heap[size]
                    i = 0
                    while True:
                        child = 2 * i + 1
                        if child >= size:
                            break
                        if child + 1 < size and _less(heap[child + 1], heap[child]):
                            child += 1
                        if _less(heap[child], last):
                            heap[i] = heap[child]
                            i = child
                        else:
                            break
                    heap[i] = last
                y = top.index // w
                x = top.index % w
                cur = lab[y, x]
                for t in range(noff):
                    ny = y + offs_y[t]
                    nx = x + offs_x[t]
                    if ny < 0 or ny >= h or nx < 0 or nx >= w:
                        continue
                    if lab[ny, nx] != 0:
                        continue
                    lab[ny, nx] = cur
                    item.value = grad[ny, nx]
                    item.order = order
                    item.index = ny * w + nx
                    order += 1
                    child = size
                    size += 1
                    while child > 0:
                        parent_i = (child - 1) // 2
                        if _less(item, heap[parent_i]):
                            heap[child] = heap[parent_i]
                            child = parent_i
                        else:
                            break
                    heap[child] = item
    finally:
        free(heap)
    return labels_arr


def felzenszwalb_merge(Py_ssize_t n_vertices, const long long[:] ea,
                       const long long[:] eb, const double[:] weights,
                       double k, Py_ssize_t min_size):
    cdef Py_ssize_t* parent = <Py_ssize_t*>malloc(n_vertices * sizeof(Py_ssize_t))
    cdef Py_ssize_t* rank = <Py_ssize_t*>malloc(n_vertices * sizeof(Py_ssize_t))
    cdef Py_ssize_t* size = <Py_ssize_t*>malloc(n_vertices * sizeof(Py_ssize_t))
    cdef double* thresh = <double*>malloc(n_vertices * sizeof(double))
    cdef Py_ssize_t ne = ea.shape[0]
    cdef Py_ssize_t v, e, ra, rb, tmp
    cdef double wt
    roots_arr = np.empty(n_vertices, dtype=np.int64)
    cdef long long[:] roots = roots_arr
    if parent == NULL or rank == NULL or size == NULL or thresh == NULL:
        free(parent); free(rank); free(size); free(thresh)
        raise MemoryError()
    try:
        with nogil:
            for v in range(n_vertices):
                parent[v] = v
                rank[v] = 0
                size[v] = 1
                thresh[v] = k
            for e in range(ne):
                ra = _find(parent, ea[e])
                rb = _find(parent, eb[e])
                wt = weights[e]
                if ra != rb and wt <= thresh[ra] and wt <= thresh[rb]:
                    if rank[ra] > rank[rb]:
                        tmp = ra; ra = rb; rb = tmp
                    parent[ra] = rb
                    size[rb] += size[ra]
                    if rank[ra] == rank[rb]:
                        rank[rb] += 1
                    thresh[rb] = wt + k / size[rb]
            for e in range(ne):
                ra = _find(parent, ea[e])
                rb = _find(parent, eb[e])
                if ra != rb and (size[ra] < min_size or size[rb] < min_size):
                    if rank[ra] > rank[rb]:
                        tmp = ra; ra = rb; rb = tmp
                    parent[ra] = rb
                    size[rb] += size[ra]
                    if rank[ra] == rank[rb]:
                        rank[rb] += 1
            for v in range(n_vertices):
                roots[v] = _find(parent, v)
    finally:
        free(parent); free(rank); free(size); free(thresh)
    return roots_arr


def slic_assign(const double[:, :] img, centers_in, double spacing,
                double compactness, Py_ssize_t max_iter):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    centers_arr = np.array(centers_in, dtype=np.float64, copy=True)
    cdef double[:, :] centers = centers_arr
    cdef Py_ssize_t nc = centers.shape[0]
    cdef double factor = (compactness * compactness) / (spacing * spacing)
    cdef Py_ssize_t s = <Py_ssize_t>ceil(spacing)
    labels_arr = np.full((h, w), -1, dtype=np.int32)
    new_arr = np.empty((h, w), dtype=np.int32)
    dist_arr = np.empty((h, w), dtype=np.float64)
    acc_arr = np.zeros((nc, 4), dtype=np.float64)
    cdef int[:, :] labels = labels_arr
    cdef int[:, :] new = new_arr
    cdef double[:, :] dist = dist_arr
    cdef double[:, :] acc = acc_arr
    cdef Py_ssize_t it, c, y, x, y0, y1, x0, x1
    cdef double ci, cy, cx, dc, dy, dx, d
    cdef bint changed
    cdef int lb
    for it in range(max_iter):
        with nogil:
            for y in range(h):
                for x in range(w):
                    dist[y, x] = INFINITY
                    new[y, x] = -1
            for c in range(nc):
                ci = centers[c, 0]
                cy = centers[c, 1]
                cx = centers[c, 2]
                y0 = <Py_ssize_t>cy - s
                if y0 < 0:
                    y0 = 0
                y1 = <Py_ssize_t>cy + s + 1
                if y1 > h:
                    y1 = h
                x0 = <Py_ssize_t>cx - s
                if x0 < 0:
                    x0 = 0
                x1 = <Py_ssize_t>cx + s + 1
                if x1 > w:
                    x1 = w
                for y in range(y0, y1):
                    dy = y - cy
                    for x in range(x0, x1):
                        dc = img[y, x] - ci
                        dx = x - cx
                        d = dc * dc + (dy * dy + dx * dx) * factor
                        if d < dist[y, x]:
                            dist[y, x] = d
                            new[y, x] = <int>c
            changed = False
            for y in range(h):
                for x in range(w):
                    if new[y, x] != labels[y, x]:
                        changed = True
                    labels[y, x] = new[y, x]
            for c in range(nc):
                acc[c, 0] = 0.0
                acc[c, 1] = 0.0
                acc[c, 2] = 0.0
                acc[c, 3] = 0.0
            for y in range(h):
                for x in range(w):
                    lb = labels[y, x]
                    if lb < 0:
                        continue
                    acc[lb, 0] += 1.0
                    acc[lb, 1] += img[y, x]
                    acc[lb, 2] += <double>y
                    acc[lb, 3] += <double>x
            for c in range(nc):
                if acc[c, 0] > 0:
                    centers[c, 0] = acc[c, 1] / acc[c, 0]
                    centers[c, 1] = acc[c, 2] / acc[c, 0]
                    centers[c, 2] = acc[c, 3] / acc[c, 0]
        if not changed:
            break
    return labels_arr
