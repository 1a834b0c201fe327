"""Boundary speed of the signature-matching functional.

Given the per-bin demand prices from the transport solve, the functional
``sum over bins of price * candidate mass`` changes, to first order, by a
boundary integral of a pointwise speed.  For kernels that depend on the
region centroid the speed has two parts: a local term proportional to the
kernel weight at the boundary point, and a moment term that accounts for
the centroid shift induced by moving the boundary.  The sign convention
makes the speed the outward velocity of steepest descent: negative where
growing the region would raise the objective.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .masks import mask_contour
from .signature import KERNELS, kernel_weight
from .validation import check_mask


@dataclass
class RegionStats:
    """Frozen per-iteration aggregates over the candidate region."""

    area: float                 # pixel count
    centroid: np.ndarray        # (x, y)
    kernel_mass: float          # total kernel weight over the region
    masses: np.ndarray          # kernel-weighted bin masses
    sigma: float
    kind: str
    moment: np.ndarray          # centroid-shift moment, see compute_stats
    price_mean: float           # prices . masses

    def __post_init__(self):
        if self.area <= 0:
            raise ValueError("region area must be positive")
        if self.kernel_mass <= 0:
            raise ValueError("kernel mass must be positive")
        if abs(float(self.masses.sum()) - 1.0) > 1e-9:
            raise ValueError("region masses must sum to 1")


def compute_stats(mask, binmap, prices, kind: str = "normal",
                  sigma: float | None = None) -> RegionStats:
    """Aggregate the region quantities the boundary speed needs.

    The moment is ``sum over region of (z - centroid) * omega(z) * g(z)``
    where ``g(z) = price[bin(z)] - prices . masses`` and ``omega`` is the
    kernel's centroid-derivative weight: the kernel itself for the normal
    kernel, the support indicator for Epanechnikov, zero for uniform.
    """
    m = check_mask(mask)
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel '{kind}'")
    prices = np.asarray(prices, dtype=float)
    bm = np.asarray(binmap)
    if bm.shape != m.shape:
        raise ValueError("binmap shape does not match the mask")
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        raise ValueError("cannot compute stats for an empty region")
    bins = bm[ys, xs]
    if bins.max() >= prices.size:
        raise ValueError("binmap refers to bins beyond the price vector")
    area = float(xs.size)
    xc, yc = float(xs.mean()), float(ys.mean())
    dx = xs - xc
    dy = ys - yc
    d2 = dx * dx + dy * dy
    if kind == "uniform":
        w = np.ones(xs.size)
    else:
        if sigma is None or sigma <= 0:
            raise ValueError("kernel bandwidth must be positive")
        if kind == "normal":
            w = np.exp(-d2 / (2.0 * sigma * sigma))
        else:
            w = np.maximum(0.0, 1.0 - d2 / (sigma * sigma))
        if w.sum() == 0.0:
            w = np.ones(xs.size)
    kernel_mass = float(w.sum())
    masses = np.bincount(bins, weights=w, minlength=prices.size) / kernel_mass
    price_mean = float(prices @ masses)
    g = prices[bins] - price_mean
    if kind == "normal":
        omega = w
    elif kind == "epanechnikov":
        omega = (d2 <= sigma * sigma).astype(float)
    else:
        omega = np.zeros(xs.size)
    moment = np.array([float((dx * omega * g).sum()),
                       float((dy * omega * g).sum())])
    return RegionStats(area, np.array([xc, yc]), kernel_mass, masses,
                       0.0 if sigma is None else float(sigma), kind,
                       moment, price_mean)


def force_values(points, stats: RegionStats, prices, binmap) -> np.ndarray:
    """Boundary speed at each (x, y) point (vectorised)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an (N, 2) point array")
    prices = np.asarray(prices, dtype=float)
    bm = np.asarray(binmap)
    xi = pts[:, 0].astype(int)
    yi = pts[:, 1].astype(int)
    g = prices[bm[yi, xi]] - stats.price_mean
    if stats.kind == "uniform":
        return -g / stats.area
    rel = pts - stats.centroid
    w = kernel_weight(pts, stats.centroid, stats.sigma, stats.kind)
    lead = rel @ stats.moment
    s2 = stats.sigma * stats.sigma
    if stats.kind == "normal":
        coef = 1.0 / (s2 * stats.area * stats.kernel_mass)
    else:
        coef = 2.0 / (s2 * stats.area * stats.kernel_mass)
    return -coef * lead - w * g / stats.kernel_mass


def force_at(z, stats: RegionStats, prices, binmap) -> float:
    """Boundary speed at one integer pixel ``z = (x, y)``."""
    return float(force_values(np.asarray(z, dtype=float)[None, :],
                              stats, prices, binmap)[0])


# ---------------------------------------------------------------------------
# minimal enclosing circle (randomised incremental on the convex hull)

def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices (N >= 1)."""
    pts = np.unique(pts, axis=0)
    if pts.shape[0] <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _circle_two(a, b):
    cx = (a[0] + b[0]) / 2.0
    cy = (a[1] + b[1]) / 2.0
    r = max(np.hypot(cx - a[0], cy - a[1]), np.hypot(cx - b[0], cy - b[1]))
    return (cx, cy, r)


def _circumcircle(a, b, c):
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0
    if d == 0.0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(np.hypot(x - p[0], y - p[1]) for p in (a, b, c))
    return (x, y, r)


def _in_circle(c, p) -> bool:
    return (c is not None
            and np.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] * (1 + 1e-14) + 1e-12)


def min_enclosing_circle(points) -> tuple[float, float, float]:
    """Exact smallest circle containing every point: (cx, cy, radius)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("expected a nonempty (N, 2) point array")
    hull = [tuple(p) for p in _convex_hull(pts)]
    random.Random(0).shuffle(hull)
    c = None
    for i, p in enumerate(hull):
        if _in_circle(c, p):
            continue
        c = (p[0], p[1], 0.0)
        for j in range(i):
            q = hull[j]
            if _in_circle(c, q):
                continue
            c = _circle_two(p, q)
            for k in range(j):
                s = hull[k]
                if _in_circle(c, s):
                    continue
                cc = _circumcircle(p, q, s)
                if cc is not None:
                    c = cc
    return c


def sigma_from_region(mask) -> float:
    """Kernel scale: half the radius of the smallest circle enclosing the
    region boundary, floored at one pixel."""
    m = check_mask(mask)
    contour = mask_contour(m)
    if contour.shape[0] == 0:
        raise ValueError("cannot derive a kernel scale from an empty region")
    _, _, r = min_enclosing_circle(contour.astype(float))
    return max(r / 2.0, 1.0)
