"""Estimator-style wrappers around the functional pipeline.

These follow the scikit-learn conventions: constructor arguments are
stored verbatim, fitted state lives in trailing-underscore attributes,
``fit`` returns ``self``, and using an unfitted estimator raises
``NotFittedError``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .config import TrackerConfig
from .sift import dense_sift
from .signature import assign_bins, cluster_features
from .tensor import basis_from_model, cp_als
from .tracker import build_reference, feature_image_of, run_sequence
from .validation import check_gray_image


class TensorSiftEncoder(BaseEstimator, TransformerMixin):
    """Learns a low-rank descriptor basis from one image and maps images
    to compact per-pixel feature planes.

    Parameters
    ----------
    rank : number of retained components per descriptor.
    max_sweeps, tol : alternating-least-squares stopping controls.
    clip : clamp-and-renormalise descriptors before compression.
    seed : RNG seed for the factor initialisation.
    """

    def __init__(self, rank=3, max_sweeps=100, tol=1e-6, clip=False, seed=0):
        self.rank = rank
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.clip = clip
        self.seed = seed

    def fit(self, X, y=None):
        img = check_gray_image(X, min_size=9)
        descriptors = dense_sift(img, clip=self.clip)
        model = cp_als(descriptors, self.rank, max_sweeps=self.max_sweeps,
                       tol=self.tol, seed=self.seed)
        self.model_ = model
        self.basis_ = basis_from_model(model)
        self.residual_ = model.residual
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        return feature_image_of(X, self.basis_, clip=self.clip)


class KdTreeBinner(BaseEstimator):
    """Variance-splitting binner for signature construction.

    ``fit`` carves the feature samples into at most ``n_bins`` axis-aligned
    cells; ``predict`` maps new samples to the nearest cell centre.
    """

    def __init__(self, n_bins=8):
        self.n_bins = n_bins

    def fit(self, X, y=None):
        feats = np.asarray(X, dtype=float)
        if feats.ndim != 2:
            raise ValueError("expected an (N, K) feature array")
        self.clusters_ = cluster_features(feats, self.n_bins)
        self.cluster_centers_ = self.clusters_.centers
        return self

    def predict(self, X):
        check_is_fitted(self, "clusters_")
        feats = np.asarray(X, dtype=float)
        if feats.ndim != 2:
            raise ValueError("expected an (N, K) feature array")
        return assign_bins(feats, self.clusters_)

    def fit_predict(self, X, y=None):
        return self.fit(X).predict(X)


class EmdContourTracker(BaseEstimator):
    """End-to-end tracker with the scikit-learn calling convention.

    ``fit(ref_image, ref_mask)`` freezes the reference model;
    ``track(frames)`` runs the sequence (the first frame should be the
    annotated one) and ``predict(frames)`` returns just the masks.
    """

    def __init__(self, rank=3, bins=8, kernel="normal", alpha=2e-4,
                 max_pde_iters=2000, emd_window=20, area_change_limit=0.10,
                 reinit_every=50, enlarge_factor=1.2, band_halfwidth=6,
                 failure_error=0.8, failure_frames=5, emd_every=1,
                 refine_first_frame=False, ms_bins=16, ms_max_iters=10,
                 als_max_sweeps=100, als_tol=1e-6, beta=None,
                 clip_descriptors=False, seed=0):
        self.rank = rank
        self.bins = bins
        self.kernel = kernel
        self.alpha = alpha
        self.max_pde_iters = max_pde_iters
        self.emd_window = emd_window
        self.area_change_limit = area_change_limit
        self.reinit_every = reinit_every
        self.enlarge_factor = enlarge_factor
        self.band_halfwidth = band_halfwidth
        self.failure_error = failure_error
        self.failure_frames = failure_frames
        self.emd_every = emd_every
        self.refine_first_frame = refine_first_frame
        self.ms_bins = ms_bins
        self.ms_max_iters = ms_max_iters
        self.als_max_sweeps = als_max_sweeps
        self.als_tol = als_tol
        self.beta = beta
        self.clip_descriptors = clip_descriptors
        self.seed = seed

    def _config(self) -> TrackerConfig:
        return TrackerConfig(**self.get_params())

    def fit(self, X, y):
        """Freeze the reference model from the annotated frame ``X`` with
        region mask ``y``."""
        cfg = self._config()
        self.model_ = build_reference(X, y, cfg)
        self.ref_mask_ = np.asarray(y, dtype=bool)
        return self

    def track(self, frames, truths=None):
        check_is_fitted(self, "model_")
        return run_sequence(frames, self.ref_mask_, truths=truths,
                            model=self.model_)

    def predict(self, frames):
        return [f.mask for f in self.track(frames).frames]

    def score(self, frames, truths):
        """Mean overlap agreement (1 - error) against truth masks."""
        result = self.track(frames, truths=truths)
        errors = [f.overlap for f in result.frames]
        return 1.0 - float(np.mean(errors))


__all__ = ["TensorSiftEncoder", "KdTreeBinner", "EmdContourTracker",
           "NotFittedError"]
