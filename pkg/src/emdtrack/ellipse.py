"""Ellipse fitting for contour points.

Implements the direct least-squares conic fit with the ellipse
constraint ``4AC - B^2 = 1`` reduced to a 3x3 eigenproblem, then converts
the conic to centre/radii/orientation form.  Degenerate inputs (too few
or collinear points) fall back to the bounding-box inscribed ellipse.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .validation import check_points

MIN_FIT_POINTS = 6
_FALLBACK_FLOOR = 1.0


@dataclass
class Ellipse:
    """Axis lengths are semi-axes with ``a >= b > 0``; ``theta`` is the
    major-axis angle in ``[-pi/2, pi/2)`` measured from the x axis."""

    x0: float
    y0: float
    a: float
    b: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("ellipse radii must be finite")
        if self.a <= 0 or self.b <= 0:
            raise ValueError("ellipse radii must be positive")
        if self.a < self.b:
            self.a, self.b = self.b, self.a
            self.theta += np.pi / 2.0
        self.theta = float((self.theta + np.pi / 2.0) % np.pi - np.pi / 2.0)
        self.x0 = float(self.x0)
        self.y0 = float(self.y0)
        self.a = float(self.a)
        self.b = float(self.b)

    def contains(self, x, y) -> np.ndarray:
        dx = np.asarray(x, dtype=float) - self.x0
        dy = np.asarray(y, dtype=float) - self.y0
        ct, st = np.cos(self.theta), np.sin(self.theta)
        major = dx * ct + dy * st
        minor = dx * st - dy * ct
        return (major / self.a) ** 2 + (minor / self.b) ** 2 <= 1.0

    def sample(self, n: int = 64) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        ct, st = np.cos(self.theta), np.sin(self.theta)
        mx = self.a * np.cos(t)
        my = self.b * np.sin(t)
        return np.column_stack([self.x0 + mx * ct - my * st,
                                self.y0 + mx * st + my * ct])


def enlarge(e: Ellipse, factor: float) -> Ellipse:
    """Scale both semi-axes about the centre."""
    if factor <= 0:
        raise ValueError("enlargement factor must be positive")
    return Ellipse(e.x0, e.y0, e.a * factor, e.b * factor, e.theta)


def _bbox_fallback(pts: np.ndarray) -> Ellipse:
    xmin, ymin = pts.min(axis=0)
    xmax, ymax = pts.max(axis=0)
    a = max((xmax - xmin) / 2.0, _FALLBACK_FLOOR)
    b = max((ymax - ymin) / 2.0, _FALLBACK_FLOOR)
    return Ellipse((xmin + xmax) / 2.0, (ymin + ymax) / 2.0, a, b, 0.0)


def _conic_to_geometric(coef: np.ndarray) -> Ellipse | None:
    a, b, c, d, e, f = coef
    if a + c < 0:  # normalise the free overall sign to a positive-definite form
        a, b, c, d, e, f = (-v for v in (a, b, c, d, e, f))
    qm = np.array([[a, b / 2.0], [b / 2.0, c]])
    if np.linalg.det(qm) <= 0:
        return None
    center = np.linalg.solve(2.0 * qm, np.array([-d, -e]))
    x0, y0 = center
    k = (a * x0 * x0 + b * x0 * y0 + c * y0 * y0
         + d * x0 + e * y0 + f)
    evals, evecs = np.linalg.eigh(qm)
    if k >= 0 or np.any(evals <= 0):
        return None
    radii = np.sqrt(-k / evals)
    order = np.argsort(radii)[::-1]
    major_vec = evecs[:, order[0]]
    theta = np.arctan2(major_vec[1], major_vec[0])
    return Ellipse(float(x0), float(y0),
                   float(radii[order[0]]), float(radii[order[1]]),
                   float(theta))


def fit_ellipse(points) -> Ellipse:
    """Least-squares ellipse through scattered (x, y) points.

    Points are shifted to their centroid and scaled to unit RMS radius
    before the fit; the conic is mapped back afterwards.  Inputs with
    fewer than six points, or for which the constrained problem has no
    ellipse solution, fall back to the axis-aligned ellipse inscribed in
    the bounding box (with unit floors) and emit a warning.
    """
    pts = check_points(points).astype(float)
    if len(pts) < MIN_FIT_POINTS:
        warnings.warn("too few points for a conic fit; "
                      "using the bounding-box ellipse", stacklevel=2)
        return _bbox_fallback(pts)
    mean = pts.mean(axis=0)
    centered = pts - mean
    scale = np.sqrt((centered ** 2).sum(axis=1).mean())
    if scale <= 0:
        warnings.warn("coincident points; using the bounding-box ellipse",
                      stacklevel=2)
        return _bbox_fallback(pts)
    x = centered[:, 0] / scale
    y = centered[:, 1] / scale

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError:
        warnings.warn("degenerate point set; using the bounding-box ellipse",
                      stacklevel=2)
        return _bbox_fallback(pts)
    c1_inv = np.array([[0.0, 0.0, 0.5],
                       [0.0, -1.0, 0.0],
                       [0.5, 0.0, 0.0]])
    m = c1_inv @ (s1 + s2 @ t)
    evals, evecs = np.linalg.eig(m)
    cond = 4.0 * evecs[0] * evecs[2] - evecs[1] ** 2
    valid = np.isreal(evals) & (np.real(cond) > 0)
    if not valid.any():
        warnings.warn("no ellipse satisfies the constraint; "
                      "using the bounding-box ellipse", stacklevel=2)
        return _bbox_fallback(pts)
    idx = int(np.nonzero(valid)[0][0])
    a1 = np.real(evecs[:, idx])
    a2 = t @ a1
    coef = np.concatenate([a1, a2])

    # undo the normalisation: substitute x -> (x - mx)/s, y -> (y - my)/s
    A, B, C, D, E, F = coef
    s = scale
    mx, my = mean
    coef_img = np.array([
        A / s ** 2,
        B / s ** 2,
        C / s ** 2,
        (-2 * A * mx - B * my) / s ** 2 + D / s,
        (-B * mx - 2 * C * my) / s ** 2 + E / s,
        (A * mx ** 2 + B * mx * my + C * my ** 2) / s ** 2
        - (D * mx + E * my) / s + F,
    ])
    geo = _conic_to_geometric(coef_img)
    if geo is None:
        warnings.warn("conic is not an ellipse; using the bounding-box "
                      "ellipse", stacklevel=2)
        return _bbox_fallback(pts)
    return geo
