"""Netpbm (P2/P3/P5/P6) and 8-bit PNG reading and writing.

Images live in memory as float64 arrays in [0, 1]; shape ``(h, w)`` for
grayscale and ``(h, w, 3)`` for RGB. Quantization to bytes happens only
here.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Raised for unreadable, malformed, or unsupported image files."""


def quantize(img: np.ndarray) -> np.ndarray:
    """Map [0, 1] intensities to bytes, rounding half away from zero.

    Values outside [0, 1] are clamped first.
    """
    scaled = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def _netpbm_tokens(data: bytes, count: int, start: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = start
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise ImageFormatError("truncated netpbm header")
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        begin = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[begin:pos])
    return tokens, pos


def _read_netpbm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ImageFormatError(f"unsupported netpbm magic {magic!r}")
    tokens, pos = _netpbm_tokens(data, 3, 2)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageFormatError(f"malformed netpbm header: {tokens!r}") from exc
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval}; only 255 is accepted")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    if magic in (b"P5", b"P6"):
        # exactly one whitespace byte separates the header from the raster
        body = data[pos + 1:pos + 1 + count]
        if len(body) != count:
            raise ImageFormatError(f"expected {count} raster bytes, found {len(body)}")
        raw = np.frombuffer(body, dtype=np.uint8)
    else:
        body = data[pos:]
        # strip comments from the plain raster as well
        lines = [ln.split(b"#", 1)[0] for ln in body.splitlines()]
        values = b" ".join(lines).split()
        if len(values) < count:
            raise ImageFormatError(f"expected {count} samples, found {len(values)}")
        raw = np.array([int(v) for v in values[:count]], dtype=np.int64)
        if raw.min() < 0 or raw.max() > 255:
            raise ImageFormatError("sample outside 0..255")
    shape = (height, width, 3) if channels == 3 else (height, width)
    return raw.reshape(shape).astype(np.float64) / 255.0


def _read_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.uint8)
        elif im.mode == "RGB":
            arr = np.asarray(im, dtype=np.uint8)
        else:
            raise ImageFormatError(f"unsupported PNG mode {im.mode!r}; need 8-bit L or RGB")
    return arr.astype(np.float64) / 255.0


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load a PGM/PPM (maxval 255) or 8-bit PNG file as intensities in [0, 1]."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if data.startswith(PNG_MAGIC):
        try:
            return _read_png(path)
        except ImageFormatError:
            raise
        except Exception as exc:
            raise ImageFormatError(f"malformed PNG {path}: {exc}") from exc
    return _read_netpbm(data)


def encode_netpbm(img: np.ndarray) -> bytes:
    q = quantize(img)
    if q.ndim == 2:
        header = f"P5\n{q.shape[1]} {q.shape[0]}\n255\n"
    elif q.ndim == 3 and q.shape[2] == 3:
        header = f"P6\n{q.shape[1]} {q.shape[0]}\n255\n"
    else:
        raise ValueError(f"cannot encode array of shape {q.shape}")
    return header.encode("ascii") + q.tobytes()


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write ``img`` as binary PGM (P5) or PPM (P6); ``.png`` paths write PNG."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        q = quantize(img)
        Image.fromarray(q).save(path, format="PNG")
        return
    path.write_bytes(encode_netpbm(img))


def save_ascii_pgm(img: np.ndarray, path: str | os.PathLike) -> None:
    q = quantize(img)
    if q.ndim != 2:
        raise ValueError("plain PGM needs a single-channel image")
    rows = "\n".join(" ".join(str(v) for v in row) for row in q)
    Path(path).write_text(f"P2\n{q.shape[1]} {q.shape[0]}\n255\n{rows}\n", encoding="ascii")


def encode_label_map(labels: np.ndarray) -> bytes:
    """Binary PGM holding label values verbatim.

    Maps with at most 255 labels use 8-bit samples; larger ones use the
    16-bit big-endian form (maxval 65535).
    """
    lab = np.asarray(labels)
    if lab.ndim != 2:
        raise ValueError("label map must be 2-D")
    if lab.size and (lab.min() < 0 or lab.max() > 65535):
        raise ValueError("label values must lie in 0..65535")
    maxval = 255 if lab.max(initial=0) <= 255 else 65535
    body = lab.astype(np.uint8 if maxval == 255 else ">u2").tobytes()
    return f"P5\n{lab.shape[1]} {lab.shape[0]}\n{maxval}\n".encode("ascii") + body


def save_label_map(labels: np.ndarray, path: str | os.PathLike) -> None:
    Path(path).write_bytes(encode_label_map(labels))


def load_label_map(path: str | os.PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ImageFormatError("label maps are binary PGM files")
    tokens, pos = _netpbm_tokens(data, 3, 2)
    width, height, maxval = (int(t) for t in tokens)
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    count = width * height
    raw = np.frombuffer(data[pos + 1:], dtype=dtype, count=count)
    return raw.reshape(height, width).astype(np.int32)
