"""Feature-space partitioning, kernel-weighted region signatures, and the
saturating ground-distance matrix between signature bins.

The partition is a K-D-tree-style recursion: the leaf with the largest
total squared deviation is split at the median of its widest-variance
component until the requested number of leaves exists.  Bin centres are
leaf means; every feature vector is later assigned to its nearest centre.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .masks import mask_centroid
from .validation import check_mask, check_matrix

KERNELS = ("normal", "epanechnikov", "uniform")


@dataclass
class ClusterSet:
    """Bin centres plus the per-component spread of the training features."""

    centers: np.ndarray   # (U, K)
    std: np.ndarray       # (K,) sample standard deviation per component

    def __post_init__(self):
        self.centers = check_matrix(self.centers)
        self.std = np.asarray(self.std, dtype=float)
        if self.std.shape != (self.centers.shape[1],):
            raise ValueError("std length must match the feature dimension")
        if np.any(self.std < 0):
            raise ValueError("std entries must be nonnegative")

    @property
    def n_bins(self) -> int:
        return self.centers.shape[0]


@dataclass
class Signature:
    """A cluster set together with normalised per-bin masses."""

    clusters: ClusterSet
    masses: np.ndarray

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if self.masses.shape != (self.clusters.n_bins,):
            raise ValueError("one mass per bin required")
        if np.any(self.masses < -1e-12):
            raise ValueError("masses must be nonnegative")
        total = float(self.masses.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"masses sum to {total}, expected 1")


def _split_leaf(leaf: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Median split along the widest-variance component; order-independent
    up to identical rows.  Returns None if the leaf cannot be split."""
    if leaf.shape[0] < 2:
        return None
    var = leaf.var(axis=0)
    if not np.any(var > 0):
        return None
    comp = int(np.argmax(var))
    others = [c for c in range(leaf.shape[1]) if c != comp]
    keys = tuple(leaf[:, c] for c in reversed(others)) + (leaf[:, comp],)
    order = np.lexsort(keys)
    half = leaf.shape[0] // 2
    return leaf[order[:half]], leaf[order[half:]]


def cluster_features(features, n_bins: int) -> ClusterSet:
    """Partition feature vectors into ``n_bins`` leaves and return their
    means plus the overall per-component sample standard deviation."""
    x = check_matrix(features)
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    distinct = np.unique(x, axis=0).shape[0]
    if distinct < n_bins:
        warnings.warn(
            f"only {distinct} distinct feature vectors; reducing bin count "
            f"from {n_bins} to {distinct}"
        )
        n_bins = distinct

    leaves = [x]
    while len(leaves) < n_bins:
        scores = []
        for leaf in leaves:
            if leaf.shape[0] < 2:
                scores.append(-1.0)
            else:
                scores.append(float(((leaf - leaf.mean(axis=0)) ** 2).sum()))
        best = int(np.argmax(scores))
        if scores[best] <= 0:
            break
        split = _split_leaf(leaves[best])
        if split is None:
            break
        leaves[best: best + 1] = [split[0], split[1]]

    centers = np.array([leaf.mean(axis=0) for leaf in leaves])
    if x.shape[0] > 1:
        std = x.std(axis=0, ddof=1)
    else:
        std = np.zeros(x.shape[1])
    return ClusterSet(centers, std)


def assign_bins(features, clusters: ClusterSet) -> np.ndarray:
    """Nearest-centre bin index per feature row; ties go to the lowest index."""
    x = check_matrix(features)
    if x.shape[1] != clusters.centers.shape[1]:
        raise ValueError("feature dimension does not match the cluster set")
    d2 = ((x[:, None, :] - clusters.centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def assign_bin(feature, clusters: ClusterSet) -> int:
    return int(assign_bins(np.asarray(feature, dtype=float)[None, :], clusters)[0])


def kernel_weight(z, center, sigma: float, kind: str = "normal"):
    """Spatial kernel weight of point(s) ``z`` about ``center``.

    ``sigma`` is the normal-kernel scale or, for the Epanechnikov kernel,
    the support radius.  ``z`` may be an (..., 2) array.
    """
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel '{kind}'")
    z = np.asarray(z, dtype=float)
    center = np.asarray(center, dtype=float)
    d2 = ((z - center) ** 2).sum(axis=-1)
    if kind == "uniform":
        return np.ones_like(d2)
    if sigma is None or sigma <= 0:
        raise ValueError("kernel bandwidth must be positive")
    if kind == "normal":
        return np.exp(-d2 / (2.0 * sigma * sigma))
    return np.maximum(0.0, 1.0 - d2 / (sigma * sigma))


def binmap_of(feature_image, clusters: ClusterSet) -> np.ndarray:
    """Per-pixel bin index for an (H, W, K) feature image."""
    fi = np.asarray(feature_image, dtype=float)
    if fi.ndim != 3:
        raise ValueError("expected an (H, W, K) feature image")
    h, w, k = fi.shape
    return assign_bins(fi.reshape(h * w, k), clusters).reshape(h, w)


def build_signature(mask, feature_image, clusters: ClusterSet,
                    kind: str = "normal", sigma: float | None = None,
                    center=None, binmap=None) -> Signature:
    """Kernel-weighted bin masses of the features inside ``mask``.

    The kernel is centred at ``center`` (default: the mask centroid) and
    masses are normalised by the total kernel weight.  A precomputed
    ``binmap`` may be passed to avoid re-assigning bins.
    """
    m = check_mask(mask)
    if not m.any():
        raise ValueError("cannot build a signature for an empty region")
    if binmap is None:
        binmap = binmap_of(feature_image, clusters)
    else:
        binmap = np.asarray(binmap)
        if binmap.shape != m.shape:
            raise ValueError("binmap shape does not match the mask")
    ys, xs = np.nonzero(m)
    if center is None:
        center = mask_centroid(m)
    if kind == "uniform":
        w = np.ones(xs.size)
    else:
        pts = np.column_stack([xs, ys]).astype(float)
        w = kernel_weight(pts, np.asarray(center, dtype=float), sigma, kind)
        if w.sum() == 0.0:
            warnings.warn("kernel support misses every region pixel; "
                          "falling back to uniform weights")
            w = np.ones(xs.size)
    masses = np.bincount(binmap[ys, xs], weights=w,
                         minlength=clusters.n_bins)[: clusters.n_bins]
    return Signature(clusters, masses / w.sum())


def ground_distance(ref: ClusterSet, cand: ClusterSet,
                    beta: float | None = None) -> np.ndarray:
    """Saturating distance matrix ``1 - exp(-beta * ||center_u - center_v||)``.

    ``beta`` defaults to the Euclidean norm of the reference per-component
    spread.  A zero ``beta`` falls back to the bounded Euclidean distance
    ``d / (1 + d)`` with a warning.
    """
    if ref.centers.shape[1] != cand.centers.shape[1]:
        raise ValueError("cluster sets live in different feature dimensions")
    if beta is None:
        beta = float(np.linalg.norm(ref.std))
    diff = ref.centers[:, None, :] - cand.centers[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    if beta > 0:
        return 1.0 - np.exp(-beta * dist)
    warnings.warn("zero feature spread; using the bounded Euclidean "
                  "ground distance d/(1+d)")
    return dist / (1.0 + dist)


SIGNATURE_MAGIC = "SIGNATURE"
SIGNATURE_VERSION = 1


def write_signature_file(sig: Signature, fp) -> None:
    """Plain-text signature: bin count, feature dimension, centres, masses."""
    u, k = sig.clusters.centers.shape
    fp.write(f"{SIGNATURE_MAGIC} {SIGNATURE_VERSION}\n")
    fp.write(f"bins {u} dim {k}\n")
    for row in sig.clusters.centers:
        fp.write("center " + " ".join(f"{v:.17g}" for v in row) + "\n")
    fp.write("std " + " ".join(f"{v:.17g}" for v in sig.clusters.std) + "\n")
    for v in sig.masses:
        fp.write(f"mass {v:.17g}\n")


def read_signature_file(fp) -> Signature:
    """Parse a signature written by :func:`write_signature_file`."""
    lines = [l.strip() for l in fp if l.strip()]
    if not lines or not lines[0].startswith(SIGNATURE_MAGIC):
        raise ValueError("not a signature file")
    head = lines[1].split()
    if len(head) != 4 or head[0] != "bins" or head[2] != "dim":
        raise ValueError("malformed signature header")
    u, k = int(head[1]), int(head[3])
    centers, masses, std = [], [], None
    for line in lines[2:]:
        tag, *vals = line.split()
        if tag == "center":
            centers.append([float(v) for v in vals])
        elif tag == "mass":
            masses.append(float(vals[0]))
        elif tag == "std":
            std = [float(v) for v in vals]
        else:
            raise ValueError(f"unexpected signature line: {line!r}")
    if len(centers) != u or len(masses) != u:
        raise ValueError("signature bin count does not match its header")
    if std is None:
        std = [0.0] * k
    clusters = ClusterSet(np.array(centers, dtype=float).reshape(u, k),
                          np.array(std, dtype=float))
    return Signature(clusters, np.array(masses, dtype=float))
