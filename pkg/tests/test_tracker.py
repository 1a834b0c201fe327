"""Reference building, per-frame refinement, sequence plumbing, and the
estimator wrappers."""

import io

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import emdtrack as et
from emdtrack import tracker as tk
from emdtrack.masks import mask_area, mask_centroid


# --- overlap metric ---------------------------------------------------------

def test_overlap_error_extremes_and_half_overlap():
    a = np.zeros((10, 10), dtype=bool)
    a[2:8, 2:8] = True
    assert tk.overlap_error(a, a) == 0.0
    b = np.zeros_like(a)
    b[0:1, 0:1] = True
    assert tk.overlap_error(a, b) == 1.0
    half = a.copy()
    half[5:8, :] = False            # exactly half the rows of a
    assert tk.overlap_error(a, half) == 1.0 / 3.0
    assert tk.overlap_error(half, a) == tk.overlap_error(a, half)
    empty = np.zeros_like(a)
    assert tk.overlap_error(empty, empty) == 1.0


def test_overlap_error_requires_matching_shapes():
    with pytest.raises(ValueError):
        tk.overlap_error(np.zeros((4, 4), dtype=bool),
                         np.zeros((5, 4), dtype=bool))


# --- stopping rules ---------------------------------------------------------

def test_flat_distance_history_stops():
    cfg = et.TrackerConfig()
    hist = [0.4] * cfg.emd_window
    assert tk.stopping_criterion(hist, 0.0, 100.0, cfg) == tk.STOP_SLOPE


def test_decreasing_history_continues():
    cfg = et.TrackerConfig()
    hist = list(np.linspace(1.0, 0.5, cfg.emd_window))
    assert tk.stopping_criterion(hist, 0.0, 100.0, cfg) is None


def test_short_history_continues():
    cfg = et.TrackerConfig()
    assert tk.stopping_criterion([0.4, 0.4, 0.4], 0.0, 100.0, cfg) is None


def test_area_runaway_stops():
    cfg = et.TrackerConfig()
    assert tk.stopping_criterion([], 100.0, 115.0, cfg) == tk.STOP_AREA
    # exactly ten percent is still allowed
    assert tk.stopping_criterion([], 100.0, 110.0, cfg) is None
    # a zero reference area disables the test
    assert tk.stopping_criterion([], 0.0, 115.0, cfg) is None


def test_rising_tail_stops_even_after_a_long_fall():
    cfg = et.TrackerConfig()
    hist = list(np.linspace(1.0, 0.2, 40)) + [0.3] * cfg.emd_window
    assert tk.stopping_criterion(hist, 0.0, 100.0, cfg) == tk.STOP_SLOPE


# --- reference model --------------------------------------------------------

def test_reference_signature_is_normalised(ref_model):
    assert np.isclose(ref_model.ref_signature.masses.sum(), 1.0)
    assert ref_model.ground.shape == (8, 8)
    assert np.allclose(np.diag(ref_model.ground), 0.0)


def test_reference_matches_itself_at_zero_distance(ref_model):
    sol = et.emd(ref_model.ref_signature.masses,
                 ref_model.ref_signature.masses, ref_model.ground)
    assert abs(sol.objective) < 1e-12


def test_reference_build_is_reproducible(short_scene):
    frames, masks = short_scene
    cfg = et.TrackerConfig()
    m1 = et.build_reference(frames[0], masks[0], cfg)
    m2 = et.build_reference(frames[0], masks[0], cfg)
    assert np.array_equal(m1.basis.projector, m2.basis.projector)
    assert np.array_equal(m1.ref_signature.masses, m2.ref_signature.masses)
    assert m1.sigma_ref == m2.sigma_ref


def test_tiny_reference_masks_are_rejected(short_scene):
    frames, _ = short_scene
    small = np.zeros(frames[0].shape, dtype=bool)
    small[10:14, 10:14] = True      # below the ellipse-fit floor
    with pytest.raises(ValueError):
        et.build_reference(frames[0], small, et.TrackerConfig())


# --- single-frame refinement ------------------------------------------------

def test_static_frame_converges_quickly_near_the_previous_mask(
        short_scene, ref_model):
    frames, masks = short_scene
    state = tk._initial_state(ref_model, frames[0], masks[0])
    res, _ = tk.track_frame(ref_model, state, frames[0], 2)
    assert res.iterations < 100
    assert len(res.emd_trace) == res.iterations
    assert tk.overlap_error(res.mask, masks[0]) < 0.1
    # the accepted contour never scores worse than the enlarged start
    assert res.emd_trace[-1] <= res.emd_trace[0] + 1e-12


def test_translated_frame_lands_within_a_pixel_and_a_half(
        short_scene, ref_model):
    frames, masks = short_scene
    for t in (1, 2, 3):
        state = tk._initial_state(ref_model, frames[t - 1], masks[t - 1])
        res, _ = tk.track_frame(ref_model, state, frames[t], t + 1)
        cx, cy = mask_centroid(res.mask)
        tx, ty = mask_centroid(masks[t])
        assert np.hypot(cx - tx, cy - ty) <= 1.5


# --- whole sequences --------------------------------------------------------

def test_sequence_returns_one_result_per_frame(short_scene):
    frames, masks = short_scene
    res = et.run_sequence(frames, masks[0], cfg=et.TrackerConfig(),
                          truths=masks)
    assert len(res.frames) == len(frames)
    assert res.frames[0].stop_reason == tk.STOP_INITIAL
    assert all(r.overlap is not None for r in res.frames)
    assert not res.failed
    assert max(r.overlap for r in res.frames) < 0.3


def test_single_frame_sequence_returns_the_mask(short_scene):
    frames, masks = short_scene
    res = et.run_sequence(frames[:1], masks[0])
    assert len(res.frames) == 1
    assert np.array_equal(res.frames[0].mask, masks[0])


def test_sequences_are_bit_reproducible(short_scene):
    frames, masks = short_scene
    r1 = et.run_sequence(frames[:3], masks[0], cfg=et.TrackerConfig())
    r2 = et.run_sequence(frames[:3], masks[0], cfg=et.TrackerConfig())
    for a, b in zip(r1.frames, r2.frames):
        assert np.array_equal(a.mask, b.mask)
        assert a.emd_trace == b.emd_trace


def test_failure_flag_needs_a_long_bad_streak(short_scene):
    frames, masks = short_scene
    junk = np.zeros_like(masks[0])
    junk[:5, :5] = True             # never overlaps the object
    five_bad = [masks[0]] + [junk] * 5
    res = et.run_sequence(frames, masks[0],
                          cfg=et.TrackerConfig(failure_frames=4),
                          truths=five_bad)
    assert res.failed               # five in a row is more than four
    res2 = et.run_sequence(frames, masks[0], cfg=et.TrackerConfig(),
                           truths=five_bad)
    assert not res2.failed          # five in a row is not more than five


def test_stored_model_reproduces_the_run(short_scene, ref_model):
    frames, masks = short_scene
    direct = et.run_sequence(frames[:3], masks[0], model=ref_model)
    buf = io.StringIO()
    et.save_model(ref_model, buf)
    buf.seek(0)
    reloaded = et.run_sequence(frames[:3], masks[0],
                               model=et.load_model(buf))
    for a, b in zip(direct.frames, reloaded.frames):
        assert np.array_equal(a.mask, b.mask)


def test_mismatched_truth_count_is_rejected(short_scene):
    frames, masks = short_scene
    with pytest.raises(ValueError):
        et.run_sequence(frames, masks[0], cfg=et.TrackerConfig(),
                        truths=masks[:2])
    with pytest.raises(ValueError):
        et.run_sequence([], masks[0], cfg=et.TrackerConfig())


# --- estimator wrappers -----------------------------------------------------

def test_tracker_estimator_follows_the_sklearn_protocol(short_scene):
    frames, masks = short_scene
    est = et.EmdContourTracker(max_pde_iters=300)
    with pytest.raises(NotFittedError):
        est.predict(frames[:2])
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()
    est.fit(frames[0], masks[0])
    out = est.predict(frames[:3])
    assert len(out) == 3
    assert out[0].dtype == bool
    score = est.score(frames[:3], masks[:3])
    assert 0.8 < score <= 1.0


def test_encoder_estimator_round_trip(short_scene):
    frames, _ = short_scene
    enc = et.TensorSiftEncoder(rank=3).fit(frames[0][:32, :32])
    fi = enc.transform(frames[0][:32, :32])
    assert fi.shape == (32, 32, 3)
    assert fi.min() >= 0.0 and fi.max() <= 255.0
