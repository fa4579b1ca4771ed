"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementations in ``_pykernels`` take over. ``RADIOLITH_BACKEND=python``
forces the fallback. Both produce identical results for the same inputs
(the bilateral filter may differ in the last bit, since numpy's vectorized
``exp`` and the C library's are not bit-identical), and row-parallel kernels are bit-identical for any thread count because each
output pixel is computed by exactly one worker with a fixed tap order.
"""
import contextlib
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_requested = os.environ.get("RADIOLITH_BACKEND", "").strip().lower()
if _requested and _requested not in _BACKENDS:
    raise ImportError(f"RADIOLITH_BACKEND={_requested!r} is not available; have {sorted(_BACKENDS)}")
_active = _requested or ("cython" if _ckernels is not None else "python")
_threads = 1


def available():
    return sorted(_BACKENDS)


def name():
    return _active


def kernels():
    return _BACKENDS[_active]


def set_backend(backend):
    global _active
    if backend not in _BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; available: {available()}")
    _active = backend


@contextlib.contextmanager
def use_backend(backend):
    previous = _active
    set_backend(backend)
    try:
        yield kernels()
    finally:
        set_backend(previous)


def set_threads(n):
    global _threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = int(n)


def get_threads():
    return _threads


@contextlib.contextmanager
def threads(n):
    previous = _threads
    set_threads(n)
    try:
        yield
    finally:
        set_threads(previous)


def run_rows(func_name, out, *args):
    """Fill ``out`` by calling ``func(*args, out, row0, row1)`` on row bands."""
    func = getattr(kernels(), func_name)
    h = out.shape[0]
    n = min(_threads, h)
    if n <= 1:
        func(*args, out, 0, h)
        return out
    bounds = np.linspace(0, h, n + 1).astype(int)
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(func, *args, out, int(a), int(b))
                   for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        for f in futures:
            f.result()
    return out
