"""Binary netpbm image I/O (P5 greyscale, P6 colour), 8-bit only.

Readers accept ``#`` comments anywhere in the header and insist on
maxval 255; writers emit the canonical single-space header and replace
the destination atomically so interrupted runs never leave half-written
frames.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class NetpbmError(ValueError):
    """Malformed or unsupported netpbm data."""


def _read_tokens(data: bytes, count: int):
    """First ``count`` whitespace-separated header tokens, skipping
    ``#`` comments; returns the tokens and the offset one byte past the
    single whitespace that terminates the last one."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if i == start:
            raise NetpbmError("truncated netpbm header")
        tokens.append(data[start:i])
    if i >= n or not data[i : i + 1].isspace():
        raise NetpbmError("netpbm header must end with whitespace")
    return tokens, i + 1


def _parse(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    if not data.startswith(magic):
        raise NetpbmError(f"expected a {magic.decode()} file")
    tokens, offset = _read_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise NetpbmError("non-numeric netpbm header field") from exc
    if width <= 0 or height <= 0:
        raise NetpbmError("image dimensions must be positive")
    if maxval != 255:
        raise NetpbmError(f"only maxval 255 is supported, got {maxval}")
    need = width * height * channels
    raster = data[offset : offset + need]
    if len(raster) < need:
        raise NetpbmError("truncated netpbm raster")
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width)
    return arr.reshape(height, width, channels)


def read_pgm(path) -> np.ndarray:
    """Greyscale image as a (H, W) uint8 array."""
    with open(path, "rb") as fh:
        return _parse(fh.read(), b"P5", 1)


def read_ppm(path) -> np.ndarray:
    """Colour image as a (H, W, 3) uint8 array."""
    with open(path, "rb") as fh:
        return _parse(fh.read(), b"P6", 3)


def read_image(path) -> np.ndarray:
    """Either netpbm flavour, as greyscale float in [0, 255].

    Colour rasters collapse through the usual luminance weights."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(b"P6"):
        rgb = _parse(data, b"P6", 3).astype(float)
        r, g, b = LUMA_WEIGHTS
        return r * rgb[:, :, 0] + g * rgb[:, :, 1] + b * rgb[:, :, 2]
    if data.startswith(b"P5"):
        return _parse(data, b"P5", 1).astype(float)
    raise NetpbmError(f"{path}: not a binary netpbm (P5/P6) file")


def _atomic_write(path, payload: bytes) -> None:
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _as_bytes(img, channels: int) -> np.ndarray:
    arr = np.asarray(img)
    expected = 2 if channels == 1 else 3
    if arr.ndim != expected or (channels == 3 and arr.shape[2] != 3):
        raise NetpbmError("image array has the wrong shape")
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr.astype(float)), 0, 255).astype(np.uint8)
    return arr


def write_pgm(path, img) -> None:
    """Store a greyscale array as binary P5 (atomically)."""
    arr = _as_bytes(img, 1)
    h, w = arr.shape
    header = f"P5\n{w} {h}\n255\n".encode()
    _atomic_write(path, header + arr.tobytes())


def write_ppm(path, img) -> None:
    """Store an RGB array as binary P6 (atomically)."""
    arr = _as_bytes(img, 3)
    h, w = arr.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode()
    _atomic_write(path, header + arr.tobytes())


def write_text(path, text: str) -> None:
    """Store a text file atomically (write temp, then rename)."""
    _atomic_write(path, text.encode())


def read_mask(path) -> np.ndarray:
    """Boolean mask from a P5 file: any value above 127 counts as set."""
    return read_pgm(path) > 127


def write_mask(path, mask) -> None:
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    write_pgm(path, arr)


def overlay_contour(image, contour_points) -> np.ndarray:
    """Grey frame with the contour painted red, as an RGB byte array."""
    base = np.clip(np.round(np.asarray(image, dtype=float)), 0, 255)
    rgb = np.stack([base, base, base], axis=2).astype(np.uint8)
    pts = np.asarray(contour_points)
    if pts.size:
        xs = pts[:, 0].astype(int)
        ys = pts[:, 1].astype(int)
        keep = (xs >= 0) & (xs < rgb.shape[1]) & (ys >= 0) & (ys < rgb.shape[0])
        rgb[ys[keep], xs[keep]] = (255, 0, 0)
    return rgb
