"""Dense 4x4x8 gradient-orientation descriptors and their projection to
K-channel feature images.

Every pixel gets a descriptor built from an 8x8 sample window (offsets
-4..+3 in each axis), Gaussian-weighted gradient magnitudes, and
mass-conserving trilinear interpolation over a 4x4 spatial grid and 8
circular phase bins.  The spatial grid is anchored so that sample offsets
-3, -1, +1, +3 land exactly on the four subwindow centres; boundary
samples have their out-of-grid share folded into the nearest cell so no
mass is lost.  There is no keypoint detection and no orientation
normalisation — the descriptor is deliberately orientation-sensitive.
"""

from __future__ import annotations

import numpy as np

from .tensor import CpBasis, mode_n_unfold, project_descriptor
from .validation import check_gray_image

WINDOW_HALF = 4                 # samples at offsets -4..+3
GAUSS_SIGMA = 4.0               # half the window width
SPATIAL_CELLS = 4
PHASE_BINS = 8
_TWO_PI = 2.0 * np.pi


def gradient_field(img) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel gradient magnitude and phase.

    Central differences in the interior, one-sided at the borders; phase
    is ``atan2(gy, gx)`` wrapped to [0, 2*pi).
    """
    arr = check_gray_image(img, min_size=3)
    gy, gx = np.gradient(arr)
    mag = np.hypot(gx, gy)
    phase = np.mod(np.arctan2(gy, gx), _TWO_PI)
    return mag, phase


def _cell_coord(offset: int) -> float:
    """Continuous subwindow coordinate of a sample offset, clipped to the
    grid so boundary samples keep their full mass."""
    return float(np.clip((offset + 3.0) / 2.0, 0.0, SPATIAL_CELLS - 1.0))


def _gauss_weight(ox: int, oy: int) -> float:
    return float(np.exp(-(ox * ox + oy * oy) / (2.0 * GAUSS_SIGMA ** 2)))


def _clip_normalise(desc: np.ndarray, limit: float = 0.2) -> np.ndarray:
    """Optional descriptor conditioning: unit-normalise, clamp, renormalise."""
    n = np.linalg.norm(desc)
    if n == 0:
        return desc
    out = np.minimum(desc / n, limit)
    n2 = np.linalg.norm(out)
    return out / n2 if n2 > 0 else out


def sift_at(img, p, clip: bool = False) -> np.ndarray:
    """Descriptor at pixel ``p = (x, y)``; the 8x8 window must fit inside.

    Returns a (4, 4, 8) array indexed (subwindow-x, subwindow-y, phase).
    """
    arr = check_gray_image(img, min_size=3)
    x, y = int(p[0]), int(p[1])
    h, w = arr.shape
    if (x - WINDOW_HALF < 0 or y - WINDOW_HALF < 0
            or x + WINDOW_HALF - 1 > w - 1 or y + WINDOW_HALF - 1 > h - 1):
        raise ValueError(
            f"descriptor window around ({x}, {y}) falls outside the image; "
            "pad the image first"
        )
    mag, phase = gradient_field(arr)
    desc = np.zeros((SPATIAL_CELLS, SPATIAL_CELLS, PHASE_BINS))
    for oy in range(-WINDOW_HALF, WINDOW_HALF):
        for ox in range(-WINDOW_HALF, WINDOW_HALF):
            m = mag[y + oy, x + ox]
            if m == 0.0:
                continue
            base = m * _gauss_weight(ox, oy)
            u = _cell_coord(ox)
            v = _cell_coord(oy)
            u0, v0 = int(u), int(v)
            fu, fv = u - u0, v - v0
            b = phase[y + oy, x + ox] * (PHASE_BINS / _TWO_PI)
            b0 = int(b) % PHASE_BINS
            fb = b - int(b)
            b1 = (b0 + 1) % PHASE_BINS
            for cu, wu in ((u0, 1.0 - fu), (u0 + 1, fu)):
                if wu == 0.0 or cu >= SPATIAL_CELLS:
                    continue
                for cv, wv in ((v0, 1.0 - fv), (v0 + 1, fv)):
                    if wv == 0.0 or cv >= SPATIAL_CELLS:
                        continue
                    share = base * wu * wv
                    desc[cu, cv, b0] += share * (1.0 - fb)
                    desc[cu, cv, b1] += share * fb
    if clip:
        desc = _clip_normalise(desc)
    return desc


def dense_sift(img, clip: bool = False) -> np.ndarray:
    """Descriptors for every pixel, stacked row-major into a 4-way tensor
    of shape ``(H*W, 4, 4, 8)``.

    The image is replicate-padded by the window half-width so border
    pixels get full windows; gradients are taken on the padded image.
    """
    arr = check_gray_image(img)
    h, w = arr.shape
    padded = np.pad(arr, WINDOW_HALF, mode="edge")
    mag, phase = gradient_field(padded)

    out = np.zeros((h, w, SPATIAL_CELLS, SPATIAL_CELLS, PHASE_BINS))
    flat_base = (np.arange(h * w) * PHASE_BINS).reshape(h, w)
    for oy in range(-WINDOW_HALF, WINDOW_HALF):
        for ox in range(-WINDOW_HALF, WINDOW_HALF):
            ms = mag[WINDOW_HALF + oy: WINDOW_HALF + oy + h,
                     WINDOW_HALF + ox: WINDOW_HALF + ox + w]
            ps = phase[WINDOW_HALF + oy: WINDOW_HALF + oy + h,
                       WINDOW_HALF + ox: WINDOW_HALF + ox + w]
            base = ms * _gauss_weight(ox, oy)
            b = ps * (PHASE_BINS / _TWO_PI)
            b0 = b.astype(int) % PHASE_BINS
            fb = b - np.floor(b)
            b1 = (b0 + 1) % PHASE_BINS
            # split each sample over its two phase bins once per offset
            spread = np.bincount((flat_base + b0).ravel(),
                                 weights=(base * (1.0 - fb)).ravel(),
                                 minlength=h * w * PHASE_BINS)
            spread += np.bincount((flat_base + b1).ravel(),
                                  weights=(base * fb).ravel(),
                                  minlength=h * w * PHASE_BINS)
            spread = spread.reshape(h, w, PHASE_BINS)
            u = _cell_coord(ox)
            v = _cell_coord(oy)
            u0, v0 = int(u), int(v)
            fu, fv = u - u0, v - v0
            for cu, wu in ((u0, 1.0 - fu), (u0 + 1, fu)):
                if wu == 0.0 or cu >= SPATIAL_CELLS:
                    continue
                for cv, wv in ((v0, 1.0 - fv), (v0 + 1, fv)):
                    if wv == 0.0 or cv >= SPATIAL_CELLS:
                        continue
                    out[:, :, cu, cv, :] += (wu * wv) * spread
    tensor = out.reshape(h * w, SPATIAL_CELLS, SPATIAL_CELLS, PHASE_BINS)
    if clip:
        norms = np.linalg.norm(tensor.reshape(h * w, -1), axis=1)
        keep = norms > 0
        flat = tensor.reshape(h * w, -1)
        flat[keep] = np.minimum(flat[keep] / norms[keep, None], 0.2)
        norms2 = np.linalg.norm(flat, axis=1)
        keep2 = norms2 > 0
        flat[keep2] /= norms2[keep2, None]
        tensor = flat.reshape(h * w, SPATIAL_CELLS, SPATIAL_CELLS, PHASE_BINS)
    return tensor


def project_image(img, basis: CpBasis, clip: bool = False) -> np.ndarray:
    """Raw per-pixel basis coefficients, shape ``(H, W, rank)``."""
    arr = check_gray_image(img)
    tensor = dense_sift(arr, clip=clip)
    rows = mode_n_unfold(tensor, 1)
    coeffs = rows @ basis.projector.T
    return coeffs.reshape(arr.shape[0], arr.shape[1], basis.rank)


def scale_channels(raw) -> np.ndarray:
    """Affine per-channel rescale to [0, 255]; constant channels go to 0."""
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 3:
        raise ValueError("expected an (H, W, K) channel stack")
    out = np.zeros_like(arr)
    for k in range(arr.shape[2]):
        lo = arr[:, :, k].min()
        hi = arr[:, :, k].max()
        if hi > lo:
            out[:, :, k] = (arr[:, :, k] - lo) * (255.0 / (hi - lo))
    return np.clip(out, 0.0, 255.0)


def tensor_sift_image(img, basis: CpBasis, clip: bool = False) -> np.ndarray:
    """K-channel feature image: project every descriptor, then rescale
    each channel to [0, 255]."""
    return scale_channels(project_image(img, basis, clip=clip))


def descriptor_at(img, p, basis: CpBasis, clip: bool = False) -> np.ndarray:
    """Raw (unscaled) coefficients of the descriptor at one pixel."""
    return project_descriptor(sift_at(img, p, clip=clip), basis)
