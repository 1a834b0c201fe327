"""Boolean region-mask helpers: area, centroid, boundary, dilation.

Masks are 2-D boolean arrays indexed ``[row, col]``; point coordinates are
``(x, y)`` pairs with ``x`` along columns and ``y`` along rows.
"""

from __future__ import annotations

import numpy as np

from .validation import check_mask


def mask_area(mask) -> int:
    return int(np.count_nonzero(check_mask(mask)))


def mask_centroid(mask) -> tuple[float, float]:
    """Mean (x, y) of the set pixels; raises on an empty mask."""
    m = check_mask(mask)
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        raise ValueError("cannot take the centroid of an empty mask")
    return float(xs.mean()), float(ys.mean())


def mask_points(mask) -> np.ndarray:
    """(N, 2) float array of (x, y) coordinates of the set pixels."""
    ys, xs = np.nonzero(check_mask(mask))
    return np.column_stack([xs, ys]).astype(float)


def _shifted(m: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Mask shifted by (dy, dx) with False filled in at the borders."""
    out = np.zeros_like(m)
    h, w = m.shape
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    ys_src = slice(max(-dy, 0), h + min(-dy, 0))
    xs_src = slice(max(-dx, 0), w + min(-dx, 0))
    out[ys, xs] = m[ys_src, xs_src]
    return out


def mask_contour(mask) -> np.ndarray:
    """Inner boundary: set pixels with at least one unset 4-neighbour.

    Pixels on the grid border count as boundary.  Returns an (N, 2) int
    array of (x, y) coordinates in row-major scan order.
    """
    m = check_mask(mask)
    interior = np.ones_like(m)
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        interior &= _shifted(m, dy, dx)
    boundary = m & ~interior
    ys, xs = np.nonzero(boundary)
    return np.column_stack([xs, ys])


def dilate4(mask) -> np.ndarray:
    """Mask grown by its 4-neighbourhood (one-pixel ring added)."""
    m = check_mask(mask)
    out = m.copy()
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        out |= _shifted(m, dy, dx)
    return out


def erode4(mask) -> np.ndarray:
    """Mask shrunk by its 4-neighbourhood (inner boundary removed)."""
    m = check_mask(mask)
    out = m.copy()
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        out &= _shifted(m, dy, dx)
    return out
