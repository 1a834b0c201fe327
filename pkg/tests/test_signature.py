"""Feature partitioning, kernel-weighted signatures, and the ground
distance matrix."""

import io

import numpy as np
import pytest

from emdtrack.signature import (ClusterSet, Signature, assign_bin,
                                assign_bins, binmap_of, build_signature,
                                cluster_features, ground_distance,
                                kernel_weight, read_signature_file,
                                write_signature_file)


def test_cluster_features_returns_requested_leaf_means():
    rng = np.random.default_rng(0)
    # two clearly separated blobs -> a 2-bin split recovers both means
    a = rng.normal(loc=(0, 0, 0), scale=0.1, size=(40, 3))
    b = rng.normal(loc=(10, 10, 10), scale=0.1, size=(40, 3))
    x = np.vstack([a, b])
    cs = cluster_features(x, 2)
    assert cs.n_bins == 2
    got = cs.centers[np.argsort(cs.centers[:, 0])]
    assert np.allclose(got[0], a.mean(axis=0), atol=1e-9)
    assert np.allclose(got[1], b.mean(axis=0), atol=1e-9)
    assert np.allclose(cs.std, x.std(axis=0, ddof=1))


def test_cluster_features_caps_bins_at_distinct_vectors():
    x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    with pytest.warns(UserWarning):
        cs = cluster_features(x, 8)
    assert cs.n_bins == 2


def test_cluster_centers_are_member_means():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(200, 3))
    cs = cluster_features(x, 8)
    assert cs.n_bins == 8
    # every training vector's nearest leaf mean reproduces that mean
    bins = assign_bins(x, cs)
    for u in range(8):
        members = x[bins == u]
        assert members.size > 0


def test_assign_bins_matches_brute_force_nearest_center():
    rng = np.random.default_rng(2)
    centers = rng.normal(size=(6, 3))
    cs = ClusterSet(centers, np.ones(3))
    pts = rng.normal(size=(50, 3))
    want = np.argmin(((pts[:, None] - centers[None]) ** 2).sum(-1), axis=1)
    assert np.array_equal(assign_bins(pts, cs), want)
    assert assign_bin(pts[0], cs) == want[0]


@pytest.mark.parametrize("kind,expect", [
    ("normal", np.exp(-25.0 / (2 * 16.0))),
    ("epanechnikov", 1.0 - 25.0 / 16.0),
    ("uniform", 1.0),
])
def test_kernel_weight_formulas(kind, expect):
    w = float(kernel_weight([3.0, 4.0], [0.0, 0.0], 4.0, kind))
    if kind == "epanechnikov":
        assert w == 0.0          # outside the support radius
        w_in = float(kernel_weight([1.0, 1.0], [0.0, 0.0], 4.0, kind))
        assert np.isclose(w_in, 1.0 - 2.0 / 16.0)
    else:
        assert np.isclose(w, expect)


def test_kernel_weight_rejects_bad_input():
    with pytest.raises(ValueError):
        kernel_weight([0, 0], [0, 0], 1.0, "triangular")
    with pytest.raises(ValueError):
        kernel_weight([0, 0], [0, 0], 0.0, "normal")


def test_signature_masses_are_normalised_and_kernel_shaped():
    h = w = 21
    fi = np.zeros((h, w, 1))
    fi[:, 11:, 0] = 10.0         # two feature values -> two bins
    cs = cluster_features(fi.reshape(-1, 1), 2)
    mask = np.ones((h, w), dtype=bool)
    sig = build_signature(mask, fi, cs, kind="normal", sigma=4.0)
    assert np.isclose(sig.masses.sum(), 1.0)
    # the centroid sits in the low-feature half, which must outweigh
    # its pixel share under a centred kernel
    lo_bin = assign_bin([0.0], cs)
    assert sig.masses[lo_bin] > 11.0 / 21.0


def test_uniform_signature_is_pixel_share():
    fi = np.zeros((10, 10, 1))
    fi[:, 5:, 0] = 1.0
    cs = cluster_features(fi.reshape(-1, 1), 2)
    mask = np.ones((10, 10), dtype=bool)
    sig = build_signature(mask, fi, cs, kind="uniform")
    assert np.allclose(np.sort(sig.masses), [0.5, 0.5])


def test_signature_ignores_pixels_outside_the_mask():
    fi = np.zeros((8, 8, 1))
    fi[:, 4:, 0] = 1.0
    cs = cluster_features(fi.reshape(-1, 1), 2)
    mask = np.zeros((8, 8), dtype=bool)
    mask[:, :4] = True           # only the zero-feature half
    sig = build_signature(mask, fi, cs, kind="uniform")
    hi_bin = assign_bin([1.0], cs)
    assert sig.masses[hi_bin] == 0.0


def test_empty_region_is_rejected():
    fi = np.zeros((4, 4, 1))
    cs = ClusterSet(np.zeros((1, 1)), np.zeros(1))
    with pytest.raises(ValueError):
        build_signature(np.zeros((4, 4), dtype=bool), fi, cs)


def test_ground_distance_saturates_and_vanishes_on_the_diagonal():
    centers = np.array([[0.0, 0.0], [3.0, 4.0], [100.0, 0.0]])
    cs = ClusterSet(centers, np.array([1.0, 1.0]))
    d = ground_distance(cs, cs)
    assert np.allclose(np.diag(d), 0.0)
    assert np.allclose(d, d.T)
    beta = float(np.hypot(1.0, 1.0))
    assert np.isclose(d[0, 1], 1.0 - np.exp(-beta * 5.0))
    assert d[0, 2] <= 1.0 and d[0, 2] > 0.999


def test_ground_distance_zero_beta_fallback_warns():
    cs = ClusterSet(np.array([[0.0], [2.0]]), np.array([0.0]))
    with pytest.warns(UserWarning):
        d = ground_distance(cs, cs)
    assert np.isclose(d[0, 1], 2.0 / 3.0)


def test_signature_file_round_trip():
    rng = np.random.default_rng(3)
    centers = rng.normal(size=(4, 3))
    masses = rng.dirichlet(np.ones(4))
    sig = Signature(ClusterSet(centers, np.abs(rng.normal(size=3))), masses)
    buf = io.StringIO()
    write_signature_file(sig, buf)
    buf.seek(0)
    again = read_signature_file(buf)
    assert np.allclose(again.clusters.centers, centers)
    assert np.allclose(again.masses, masses)
    assert np.allclose(again.clusters.std, sig.clusters.std)


def test_signature_file_rejects_garbage():
    with pytest.raises(ValueError):
        read_signature_file(io.StringIO("not a signature\n"))
    with pytest.raises(ValueError):
        read_signature_file(io.StringIO("SIGNATURE 1\nbins 2 dim 1\n"
                                        "center 0\nmass 1\n"))


def test_binmap_covers_every_pixel():
    rng = np.random.default_rng(4)
    fi = rng.uniform(0, 255, size=(12, 9, 3))
    cs = cluster_features(fi.reshape(-1, 3), 8)
    bm = binmap_of(fi, cs)
    assert bm.shape == (12, 9)
    assert bm.min() >= 0 and bm.max() < 8
