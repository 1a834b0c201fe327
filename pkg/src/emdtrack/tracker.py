"""The full tracking pipeline.

A reference model is built once: dense gradient descriptors are
compressed through a low-rank basis, the compressed in-region features
are clustered into signature bins, and the reference signature plus
ground-distance matrix are frozen.  Each subsequent frame is relocated by
mean shift, re-seeded with an enlarged fitted ellipse, and refined by
evolving the contour downhill on the transport distance between the
candidate and reference signatures until the distance stops improving or
the region area runs away.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import meanshift
from .config import TrackerConfig, parse_config_text, serialize_config
from .ellipse import Ellipse, enlarge, fit_ellipse
from .emd import EmdSolution, emd
from .force import compute_stats, force_values, sigma_from_region
from .levelset import (ContourLostError, EvolveParams, cfl_dt, evolve_step,
                       extract_region, front_touches_rim, grid_from_mask,
                       init_from_ellipse, reinitialize)
from .masks import mask_area, mask_contour
from .sift import dense_sift, project_image, scale_channels
from .signature import ClusterSet, Signature, binmap_of, build_signature, \
    cluster_features, ground_distance, read_signature_file, \
    write_signature_file
from .tensor import CpBasis, basis_from_model, cp_als, load_basis, save_basis
from .validation import check_gray_image, check_mask

STOP_INITIAL = "initial"
STOP_SLOPE = "slope"
STOP_AREA = "area"
STOP_MAX_ITERS = "max_iters"
STOP_LOST = "lost"


@dataclass
class TrackerModel:
    """Everything frozen at reference time."""

    config: TrackerConfig
    basis: CpBasis
    clusters: ClusterSet
    ref_signature: Signature
    ground: np.ndarray
    sigma_ref: float


@dataclass
class FrameResult:
    index: int
    mask: np.ndarray
    contour: np.ndarray
    stop_reason: str
    iterations: int
    emd_trace: list = field(default_factory=list)
    overlap: float | None = None


@dataclass
class SequenceResult:
    frames: list
    failed: bool
    config: TrackerConfig

    @property
    def errors(self):
        return [f.overlap for f in self.frames]


@dataclass
class _State:
    """What one frame hands to the next."""

    mask: np.ndarray
    contour: np.ndarray
    area: float
    ms_model: meanshift.MeanShiftModel


def overlap_error(a, b) -> float:
    """Region disagreement: 0 for identical masks, 1 for disjoint ones.

    Defined as ``1 - 2|A n B| / (|A| + |B|)``; two empty masks count as
    total disagreement (a lost track, not a trivial success).
    """
    ma = check_mask(a)
    mb = check_mask(b, shape=ma.shape)
    denom = int(ma.sum()) + int(mb.sum())
    if denom == 0:
        return 1.0
    # integer numerator and a single division keep simple ratios exact
    inter = int((ma & mb).sum())
    return float(denom - 2 * inter) / float(denom)


def stopping_criterion(emd_history, area_prev: float, area_now: float,
                       cfg: TrackerConfig) -> str | None:
    """Decide whether contour refinement should stop.

    ``area_prev`` is the reference area for the runaway test (pass 0 to
    disable it); ``emd_history`` is checked over its trailing window with
    an ordinary least-squares slope.
    """
    if area_prev > 0:
        if abs(area_now - area_prev) / area_prev > cfg.area_change_limit:
            return STOP_AREA
    if len(emd_history) >= cfg.emd_window:
        tail = np.asarray(emd_history[-cfg.emd_window:], dtype=float)
        t = np.arange(len(tail), dtype=float)
        t -= t.mean()
        denom = float((t * t).sum())
        slope = float((t * (tail - tail.mean())).sum()) / denom
        if slope >= 0.0:
            return STOP_SLOPE
    return None


def feature_image_of(image, basis: CpBasis, clip: bool = False) -> np.ndarray:
    """Byte-scaled low-rank feature image for one frame."""
    img = check_gray_image(image, min_size=9)
    return scale_channels(project_image(img, basis, clip=clip))


def build_reference(ref_image, ref_mask, cfg: TrackerConfig) -> TrackerModel:
    """Learn the compression basis, signature bins, and reference
    signature from the annotated first frame."""
    img = check_gray_image(ref_image, min_size=9)
    mask = check_mask(ref_mask, shape=img.shape)
    if mask_area(mask) < 36:
        raise ValueError("reference region is too small to fit an ellipse "
                         "around (need at least 36 pixels)")
    descriptors = dense_sift(img, clip=cfg.clip_descriptors)
    model = cp_als(descriptors, cfg.rank, max_sweeps=cfg.als_max_sweeps,
                   tol=cfg.als_tol, seed=cfg.seed)
    basis = basis_from_model(model)
    feature_image = feature_image_of(img, basis, clip=cfg.clip_descriptors)
    in_region = feature_image[mask]
    clusters = cluster_features(in_region, cfg.bins)
    sigma_ref = sigma_from_region(mask)
    binmap = binmap_of(feature_image, clusters)
    ref_signature = build_signature(mask, feature_image, clusters,
                                    kind=cfg.kernel, sigma=sigma_ref,
                                    binmap=binmap)
    ground = ground_distance(clusters, clusters, beta=cfg.beta)
    return TrackerModel(cfg, basis, clusters, ref_signature, ground,
                        sigma_ref)


MODEL_MAGIC = "EMDTRACK-MODEL"
MODEL_VERSION = 1


def save_model(model: TrackerModel, fp) -> None:
    """Write the frozen reference model as sectioned plain text."""
    fp.write(f"{MODEL_MAGIC} {MODEL_VERSION}\n")
    fp.write(f"sigma_ref {model.sigma_ref:.17g}\n")
    config_text = serialize_config(model.config)
    config_lines = config_text.splitlines()
    fp.write(f"config {len(config_lines)}\n")
    fp.write(config_text)
    save_basis(model.basis, fp)
    write_signature_file(model.ref_signature, fp)


def load_model(fp) -> TrackerModel:
    """Read a model written by :func:`save_model`; the ground-distance
    matrix is rebuilt from the stored clusters and beta."""
    lines = fp.read().splitlines()
    if not lines or not lines[0].startswith(MODEL_MAGIC):
        raise ValueError("not a tracker model file")
    if lines[1].split()[0] != "sigma_ref":
        raise ValueError("malformed model file: missing sigma_ref")
    sigma_ref = float(lines[1].split()[1])
    head = lines[2].split()
    if head[0] != "config":
        raise ValueError("malformed model file: missing config section")
    n_cfg = int(head[1])
    cfg = parse_config_text("\n".join(lines[3 : 3 + n_cfg]), source="<model>")
    rest = lines[3 + n_cfg :]
    try:
        sig_at = next(i for i, l in enumerate(rest) if l.startswith("SIGNATURE"))
    except StopIteration:
        raise ValueError("malformed model file: missing signature section")
    basis = load_basis(io.StringIO("\n".join(rest[:sig_at]) + "\n"))
    signature = read_signature_file(io.StringIO("\n".join(rest[sig_at:]) + "\n"))
    ground = ground_distance(signature.clusters, signature.clusters,
                             beta=cfg.beta)
    return TrackerModel(cfg, basis, signature.clusters, signature, ground,
                        sigma_ref)


def _initial_state(model: TrackerModel, first_image, ref_mask) -> _State:
    cfg = model.config
    feature_image = feature_image_of(first_image, model.basis,
                                     clip=cfg.clip_descriptors)
    mask = check_mask(ref_mask, shape=feature_image.shape[:2])
    contour = mask_contour(mask)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        window = fit_ellipse(contour)
    ms_model = meanshift.build_model(feature_image, window, bins=cfg.ms_bins)
    return _State(mask, contour, float(mask_area(mask)), ms_model)


def _refine(model: TrackerModel, feature_image, binmap, grid, prev_area):
    """Evolve the contour until a stopping rule fires.

    Returns the final mask/contour, the stop reason, and the per-iteration
    transport-distance trace.  The runaway-area rule only arms once an
    iterate first comes within the configured band of the previous frame's
    area, so the deliberately oversized initial contour can shrink freely.
    """
    cfg = model.config
    params = EvolveParams(alpha=cfg.alpha, reinit_every=cfg.reinit_every,
                          band_halfwidth=cfg.band_halfwidth)
    costs = model.ground
    emd_trace: list = []
    armed = False
    last_mask = None
    last_contour = None
    sol: EmdSolution | None = None
    reason = STOP_MAX_ITERS
    iterations = 0
    for it in range(cfg.max_pde_iters):
        try:
            mask, contour = extract_region(grid)
        except ContourLostError:
            reason = STOP_LOST
            break
        area = float(mask_area(mask))
        sigma = sigma_from_region(mask)
        if sol is None or it % cfg.emd_every == 0:
            cand = build_signature(mask, feature_image, model.clusters,
                                   kind=cfg.kernel, sigma=sigma,
                                   binmap=binmap)
            # reference acts as the supply, the evolving candidate as demand
            sol = emd(model.ref_signature.masses, cand.masses, costs)
        emd_trace.append(sol.objective)
        iterations = it + 1
        if not armed and prev_area > 0 \
                and abs(area - prev_area) / prev_area <= cfg.area_change_limit:
            armed = True
        reason_now = stopping_criterion(emd_trace,
                                        prev_area if armed else 0.0,
                                        area, cfg)
        if reason_now == STOP_AREA:
            reason = STOP_AREA
            if last_mask is not None:
                mask, contour = last_mask, last_contour
            break
        if reason_now == STOP_SLOPE:
            reason = STOP_SLOPE
            break
        last_mask, last_contour = mask, contour
        prices = sol.demand_prices
        stats = compute_stats(mask, binmap, prices, kind=cfg.kernel,
                              sigma=sigma)
        ys, xs = np.nonzero(grid.band)
        pts = np.column_stack([xs, ys]).astype(float)
        speed = np.zeros(grid.phi.shape)
        speed[ys, xs] = force_values(pts, stats, prices, binmap)
        dt = cfl_dt(grid, speed, cfg.alpha)
        grid = evolve_step(grid, speed, params, dt)
        try:
            if (it + 1) % cfg.reinit_every == 0 or front_touches_rim(grid):
                grid = reinitialize(grid)
        except ContourLostError:
            reason = STOP_LOST
            iterations = it + 1
            break
    else:
        try:
            mask, contour = extract_region(grid)
        except ContourLostError:
            reason = STOP_LOST
    if reason == STOP_LOST and last_mask is not None:
        mask, contour = last_mask, last_contour
    if reason == STOP_LOST and last_mask is None:
        return None, None, reason, emd_trace, iterations
    return mask, contour, reason, emd_trace, iterations


def track_frame(model: TrackerModel, state: _State, image,
                index: int) -> tuple[FrameResult, _State]:
    """Track one frame given the previous frame's state."""
    cfg = model.config
    feature_image = feature_image_of(image, model.basis,
                                     clip=cfg.clip_descriptors)
    binmap = binmap_of(feature_image, model.clusters)
    ms_binmap, _ = meanshift.quantise(feature_image, cfg.ms_bins)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        window = fit_ellipse(state.contour)
    moved, _ok = meanshift.mean_shift(ms_binmap, state.ms_model, window,
                                      max_iters=cfg.ms_max_iters)
    seed = enlarge(moved, cfg.enlarge_factor)
    shape = feature_image.shape[:2]
    try:
        grid = init_from_ellipse(seed, shape, cfg.band_halfwidth)
    except ContourLostError:
        grid = None
    if grid is None:
        mask, contour, reason, trace, iters = None, None, STOP_LOST, [], 0
    else:
        mask, contour, reason, trace, iters = _refine(
            model, feature_image, binmap, grid, state.area)
    if mask is None:
        # keep the previous region rather than emit nothing
        mask, contour = state.mask, state.contour
    result = FrameResult(index, mask, contour, reason, iters, trace)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        window = fit_ellipse(contour)
        ms_model = meanshift.build_model(feature_image, window,
                                         bins=cfg.ms_bins)
    if not ms_model.hist.any():
        ms_model = state.ms_model
    new_state = _State(mask, contour, float(mask_area(mask)), ms_model)
    return result, new_state


def run_sequence(frames, ref_mask, cfg: TrackerConfig | None = None,
                 truths=None, model: TrackerModel | None = None) -> SequenceResult:
    """Track a whole sequence; the first frame is the annotated one.

    ``frames`` is a sequence of greyscale arrays; ``truths`` (optional)
    holds one boolean mask per frame for scoring.  The first frame's
    output is the reference mask itself unless ``refine_first_frame`` is
    set, in which case the contour is refined in place before tracking
    starts.
    """
    if cfg is None:
        cfg = model.config if model is not None else TrackerConfig()
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to track")
    if truths is not None:
        truths = list(truths)
        if len(truths) != len(frames):
            raise ValueError("need one truth mask per frame")
    if model is None:
        model = build_reference(frames[0], ref_mask, cfg)
    state = _initial_state(model, frames[0], ref_mask)
    if cfg.refine_first_frame:
        feature_image = feature_image_of(frames[0], model.basis,
                                         clip=cfg.clip_descriptors)
        binmap = binmap_of(feature_image, model.clusters)
        grid = grid_from_mask(state.mask, cfg.band_halfwidth)
        mask, contour, reason, trace, iters = _refine(
            model, feature_image, binmap, grid, state.area)
        if mask is None:
            mask, contour = state.mask, state.contour
        first = FrameResult(1, mask, contour, reason, iters, trace)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ms_window = fit_ellipse(contour)
        ms_model = meanshift.build_model(feature_image, ms_window,
                                         bins=cfg.ms_bins)
        state = _State(mask, contour, float(mask_area(mask)), ms_model)
    else:
        first = FrameResult(1, state.mask, state.contour, STOP_INITIAL, 0, [])
    results = [first]
    for offset, frame in enumerate(frames[1:], start=2):
        result, state = track_frame(model, state, frame, offset)
        results.append(result)
    failed = False
    if truths is not None:
        streak = 0
        for res, truth in zip(results, truths):
            res.overlap = overlap_error(res.mask, truth)
            if res.overlap > cfg.failure_error:
                streak += 1
                if streak > cfg.failure_frames:
                    failed = True
            else:
                streak = 0
    return SequenceResult(results, failed, cfg)
