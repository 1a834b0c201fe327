"""Histogram-based mean-shift relocation of an elliptical window.

A reference model is a kernel-weighted joint histogram of quantised
feature channels inside an ellipse.  Relocation repeatedly reweights the
candidate window pixels by the ratio of model to candidate histograms and
moves the window centre to the weighted pixel mean; the axes and
orientation stay fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ellipse import Ellipse

DEFAULT_BINS = 16
SHIFT_TOL = 0.5
MAX_ITERS = 10


@dataclass
class MeanShiftModel:
    hist: np.ndarray
    bins: int
    channels: int

    def __post_init__(self):
        self.hist = np.asarray(self.hist, dtype=float)
        if self.hist.ndim != 1 or len(self.hist) != self.bins ** self.channels:
            raise ValueError("histogram length must be bins ** channels")


def quantise(feature_image, bins: int = DEFAULT_BINS):
    """Flat joint bin index per pixel for byte-scaled channels."""
    img = np.asarray(feature_image, dtype=float)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise ValueError("feature image must be 2-D or HxWxK")
    per = np.floor(img * bins / 256.0).astype(int)
    per = np.clip(per, 0, bins - 1)
    flat = np.zeros(img.shape[:2], dtype=int)
    for k in range(img.shape[2]):
        flat = flat * bins + per[:, :, k]
    return flat, img.shape[2]


def _window_pixels(e: Ellipse, shape):
    """In-window pixel coordinates and squared normalised radii."""
    h, w = shape
    reach = e.a  # the major semi-axis bounds the rotated extent
    y_lo = max(int(np.floor(e.y0 - reach)), 0)
    y_hi = min(int(np.ceil(e.y0 + reach)) + 1, h)
    x_lo = max(int(np.floor(e.x0 - reach)), 0)
    x_hi = min(int(np.ceil(e.x0 + reach)) + 1, w)
    if y_lo >= y_hi or x_lo >= x_hi:
        empty = np.empty(0, dtype=int)
        return empty, empty, np.empty(0)
    ys, xs = np.mgrid[y_lo:y_hi, x_lo:x_hi]
    dx = xs - e.x0
    dy = ys - e.y0
    ct, st = np.cos(e.theta), np.sin(e.theta)
    major = dx * ct + dy * st
    minor = dx * st - dy * ct
    rho2 = (major / e.a) ** 2 + (minor / e.b) ** 2
    keep = rho2 <= 1.0
    return ys[keep], xs[keep], rho2[keep]


def window_histogram(binmap: np.ndarray, n_bins: int, e: Ellipse) -> np.ndarray:
    """Epanechnikov-weighted joint histogram of the window, normalised to
    unit mass; all-zero when the window misses the image."""
    ys, xs, rho2 = _window_pixels(e, binmap.shape)
    hist = np.zeros(n_bins)
    if len(ys) == 0:
        return hist
    weights = 1.0 - rho2
    np.add.at(hist, binmap[ys, xs], weights)
    total = hist.sum()
    if total > 0:
        hist /= total
    return hist


def build_model(feature_image, e: Ellipse, bins: int = DEFAULT_BINS) -> MeanShiftModel:
    binmap, channels = quantise(feature_image, bins)
    hist = window_histogram(binmap, bins ** channels, e)
    return MeanShiftModel(hist, bins, channels)


def mean_shift(binmap: np.ndarray, model: MeanShiftModel, start: Ellipse,
               max_iters: int = MAX_ITERS, tol: float = SHIFT_TOL):
    """Move the window centre towards the model's histogram.

    Returns the relocated ellipse and True on an ordinary run; a window
    that leaves the image or produces all-zero weights stops the walk and
    returns the last valid position with False.
    """
    n_bins = len(model.hist)
    e = start
    for _ in range(max_iters):
        ys, xs, rho2 = _window_pixels(e, binmap.shape)
        if len(ys) == 0:
            return e, False
        bins_here = binmap[ys, xs]
        weights = 1.0 - rho2
        p_hat = np.zeros(n_bins)
        np.add.at(p_hat, bins_here, weights)
        total = p_hat.sum()
        if total <= 0:
            return e, False
        p_hat /= total
        ratio = np.zeros(n_bins)
        nz = p_hat > 0
        ratio[nz] = np.sqrt(model.hist[nz] / p_hat[nz])
        w = ratio[bins_here]
        wsum = w.sum()
        if wsum <= 0:
            return e, False
        new_x = float((w * xs).sum() / wsum)
        new_y = float((w * ys).sum() / wsum)
        shift = float(np.hypot(new_x - e.x0, new_y - e.y0))
        e = Ellipse(new_x, new_y, e.a, e.b, e.theta)
        if shift < tol:
            break
    return e, True
