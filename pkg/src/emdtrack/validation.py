"""Shared input checks for arrays handed to the public API."""

from __future__ import annotations

import numpy as np


def check_gray_image(img, min_size: int = 1) -> np.ndarray:
    """Coerce to a finite 2-D float array of at least ``min_size`` per axis."""
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    if min(arr.shape) < min_size:
        raise ValueError(
            f"image must be at least {min_size}x{min_size}, got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr


def check_mask(mask, shape=None) -> np.ndarray:
    """Coerce to a 2-D boolean mask, optionally enforcing a grid shape."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D mask, got shape {arr.shape}")
    if shape is not None and tuple(arr.shape) != tuple(shape):
        raise ValueError(f"mask shape {arr.shape} does not match grid {tuple(shape)}")
    return arr.astype(bool)


def check_prob_vector(v, tol: float = 1e-9) -> np.ndarray:
    """Coerce to a 1-D nonnegative vector summing to one within ``tol``."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a nonempty 1-D mass vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("mass vector contains non-finite values")
    if np.any(arr < -tol):
        raise ValueError("mass vector has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"mass vector sums to {total}, expected 1 within {tol}")
    return np.clip(arr, 0.0, None)


def check_matrix(m, shape=None, nonnegative: bool = False) -> np.ndarray:
    """Coerce to a finite 2-D float array, optionally of fixed shape."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if shape is not None and tuple(arr.shape) != tuple(shape):
        raise ValueError(f"matrix shape {arr.shape} does not match {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite values")
    if nonnegative and np.any(arr < 0):
        raise ValueError("matrix has negative entries")
    return arr


def check_points(pts, min_count: int = 1) -> np.ndarray:
    """Coerce to an (N, 2) float array of (x, y) points."""
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (N, 2) point array, got shape {arr.shape}")
    if arr.shape[0] < min_count:
        raise ValueError(f"need at least {min_count} points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points contain non-finite values")
    return arr
