import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mscr.augmentation import (AugmentationConfig, augment, export_csv, parent_rng, read_export,
                               sample_ball, unit_offsets, with_clean)
from mscr.dataset import synth_2d
from mscr.errors import ValidationError
from mscr.norms import Norm, distances_to
from mscr.separation import min_class_separation


def test_zero_radius_returns_center():
    c = np.array([0.3, 0.7, 0.1])
    out = sample_ball(c, 0.0, "l2", parent_rng(0, 0))
    np.testing.assert_array_equal(out, c)


def test_linf_containment_and_mean_gap():
    off = unit_offsets(1, 2, 100_000, "linf", seed=1)[0] * 0.1
    assert np.abs(off).max() <= 0.1
    assert np.abs(off).mean(axis=0) == pytest.approx([0.05, 0.05], abs=1e-3)


def test_l2_mean_radius_d3():
    off = unit_offsets(1, 3, 100_000, "l2", seed=2)[0]
    r = np.linalg.norm(off, axis=1)
    assert r.max() <= 1.0
    assert r.mean() == pytest.approx(0.75, abs=0.01)


@pytest.mark.parametrize("d", [1, 2, 5, 50])
def test_l2_radius_distribution_is_uniform_in_volume(d):
    r = np.linalg.norm(unit_offsets(1, d, 20_000, "l2", seed=d)[0], axis=1)
    # r**d is Uniform(0, 1) for a uniform ball
    assert stats.kstest(r ** d, "uniform").pvalue > 0.001


def test_l2_directions_are_isotropic():
    off = unit_offsets(1, 3, 50_000, "l2", seed=9)[0]
    unit = off / np.linalg.norm(off, axis=1, keepdims=True)
    assert np.abs(unit.mean(axis=0)).max() < 0.02


def test_linf_marginals_pass_chi_square():
    off = unit_offsets(1, 4, 100_000, "linf", seed=3)[0]
    for j in range(4):
        counts, _ = np.histogram(off[:, j], bins=20, range=(-1, 1))
        assert stats.chisquare(counts).pvalue > 0.01


def test_augment_counts_labels_and_parents():
    ds = synth_2d("blobs", 5, 0.0, seed=0)
    aug = augment(ds, AugmentationConfig(epsilon=0.05, k=10, seed=4))
    assert aug.n == 50
    np.testing.assert_array_equal(aug.labels, np.repeat(ds.labels, 10))
    np.testing.assert_array_equal(aug.parent_index, np.repeat(np.arange(5), 10))
    assert aug.sample_ordinal.tolist()[:10] == list(range(1, 11))


def test_augment_is_deterministic():
    ds = synth_2d("two_moons", 50, 0.1, seed=0)
    cfg = AugmentationConfig(epsilon=0.02, k=3, norm="l2", seed=17)
    np.testing.assert_array_equal(augment(ds, cfg).features, augment(ds, cfg).features)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), k1=st.integers(1, 20), extra=st.integers(1, 20),
       d=st.integers(1, 8), norm=st.sampled_from(["linf", "l2"]))
def test_prefix_stability_across_k(seed, k1, extra, d, norm):
    small = unit_offsets(3, d, k1, norm, seed)
    large = unit_offsets(3, d, k1 + extra, norm, seed)
    np.testing.assert_array_equal(small, large[:, :k1])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**9), eps=st.floats(0.0, 0.5), clip=st.booleans(),
       norm=st.sampled_from(["linf", "l2"]))
def test_containment_and_label_preservation(seed, eps, clip, norm):
    ds = synth_2d("rings", 20, 0.05, seed=seed % 1000)
    aug = augment(ds, AugmentationConfig(epsilon=eps, k=5, norm=norm, clip_to_unit=clip, seed=seed))
    parents = ds.features[aug.parent_index]
    gaps = aug.features - parents
    dist = np.abs(gaps).max(axis=1) if norm == "linf" else np.linalg.norm(gaps, axis=1)
    assert np.all(dist <= eps * (1 + 1e-12))
    np.testing.assert_array_equal(aug.labels, ds.labels[aug.parent_index])
    if clip:
        assert aug.features.min() >= 0.0 and aug.features.max() <= 1.0


@pytest.mark.parametrize("norm", ["linf", "l2"])
def test_balls_at_eps_min_never_cross_classes(norm):
    ds = synth_2d("two_moons", 400, 0.1, seed=5)
    eps = min_class_separation(ds, norm).epsilon_min
    aug = augment(ds, AugmentationConfig(epsilon=eps, k=20, norm=norm, seed=1))
    n = Norm.parse(norm)
    for i in range(ds.n):
        other = ds.features[ds.labels != ds.labels[i]]
        assert distances_to(other, ds.features[i], n).min() >= 2 * eps
    # each augmented point stays at least as close to its parent as to any other-class point
    for i in range(0, aug.n, 97):
        x = aug.features[i]
        own = distances_to(ds.features[[aug.parent_index[i]]], x, n)[0]
        other = distances_to(ds.features[ds.labels != aug.labels[i]], x, n).min()
        assert own <= other


def test_config_validation():
    with pytest.raises(ValidationError):
        AugmentationConfig(epsilon=-0.1)
    with pytest.raises(ValidationError):
        AugmentationConfig(epsilon=0.1, k=0)
    with pytest.raises(ValidationError):
        AugmentationConfig(epsilon=float("inf"))


def test_export_round_trip(tmp_path):
    ds = synth_2d("blobs", 6, 0.0, seed=1)
    full = with_clean(ds, augment(ds, AugmentationConfig(epsilon=0.01, k=2, seed=0)))
    path = export_csv(full, tmp_path / "aug.csv")
    parent, ordinal, labels, X = read_export(path)
    np.testing.assert_array_equal(parent, full.parent_index)
    np.testing.assert_array_equal(ordinal, full.sample_ordinal)
    np.testing.assert_array_equal(labels, full.labels)
    np.testing.assert_array_equal(X, full.features)
    assert (ordinal == 0).sum() == 6
