import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mscr.dataset import Dataset, synth_2d
from mscr.errors import UndefinedSeparationError
from mscr.kernels.separation import class_layout, total_pairs
from mscr.separation import (SeparationResult, min_class_separation, min_class_separation_oracle,
                             per_point_margin, per_point_margins, separation_arrays)

# random grids can put two labels on one point; that case has its own test
pytestmark = pytest.mark.filterwarnings("ignore:points .* coincide:RuntimeWarning")


def make(points, labels, classes=None):
    labels = np.asarray(labels)
    return Dataset(np.asarray(points, dtype=float), labels, classes or int(labels.max()) + 1)


def random_set(seed, n=None, d=None, k=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 120))
    d = d or int(rng.integers(1, 12))
    k = k or int(rng.integers(2, 5))
    labels = rng.integers(0, k, n)
    labels[:2] = [0, 1]
    # coarse grids produce plenty of exact ties
    X = rng.integers(0, 8, (n, d)) / 7.0 if seed % 3 == 0 else rng.random((n, d))
    return make(X, labels, k)


def test_two_point_l2():
    ds = make([[0, 0], [0.1, 0]], [0, 1])
    res = min_class_separation_oracle(ds, "l2")
    assert res.two_r == pytest.approx(0.1, abs=1e-15)
    assert res.epsilon_min == res.two_r / 2
    assert res.witness == (0, 1)
    assert per_point_margin(ds, "l2", 0) == pytest.approx(0.1, abs=1e-15)


def test_linf_is_max_coordinate_gap():
    ds = make([[0, 0], [0.3, 0.4]], [0, 1])
    assert min_class_separation_oracle(ds, "linf").two_r == 0.4
    assert min_class_separation(ds, "linf").two_r == 0.4


def test_duplicate_point_with_two_labels_warns():
    ds = make([[0.2, 0.2], [0.2, 0.2], [0.9, 0.9]], [0, 1, 1])
    with pytest.warns(RuntimeWarning, match="coincide"):
        res = min_class_separation(ds, "linf")
    assert res.two_r == 0.0 and res.degenerate


def test_single_class_is_undefined():
    ds = make([[0, 0], [1, 1]], [1, 1], classes=2)
    with pytest.raises(UndefinedSeparationError):
        min_class_separation(ds, "linf")
    with pytest.raises(UndefinedSeparationError):
        min_class_separation_oracle(ds, "l2")


def test_witness_is_an_interclass_pair_at_the_minimum():
    ds = random_set(1, n=200, d=10, k=3)
    for norm in ("linf", "l2"):
        res = min_class_separation(ds, norm)
        i, j = res.witness
        assert ds.labels[i] != ds.labels[j]
        diff = ds.features[i] - ds.features[j]
        dist = np.max(np.abs(diff)) if norm == "linf" else math.sqrt(np.cumsum(diff * diff)[-1])
        assert dist == res.two_r


@pytest.mark.parametrize("seed", range(40))
@pytest.mark.parametrize("norm", ["linf", "l2"])
def test_matches_oracle_bit_for_bit(seed, norm):
    ds = random_set(seed)
    ref = min_class_separation_oracle(ds, norm)
    for use_numba in (True, False):
        for threads in (1, 3):
            got = min_class_separation(ds, norm, threads=threads, use_numba=use_numba)
            assert got.two_r == ref.two_r
            assert got.witness == ref.witness
            assert got.epsilon_min == ref.epsilon_min


@pytest.mark.parametrize("norm", ["linf", "l2"])
def test_pruning_accounts_for_every_pair(norm):
    ds = random_set(7, n=250, d=6, k=4)
    res = min_class_separation(ds, norm)
    _, runs = class_layout(ds.labels)
    assert res.pairs_examined + res.pairs_pruned == total_pairs(runs)
    assert res.pairs_pruned > 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), exponent=st.integers(-4, 4), norm=st.sampled_from(["linf", "l2"]))
def test_scale_equivariance(seed, exponent, norm):
    ds = random_set(seed)
    s = 2.0 ** exponent  # powers of two scale without rounding
    scaled = make(ds.features * s, ds.labels, ds.class_count)
    assert min_class_separation(scaled, norm).two_r == min_class_separation(ds, norm).two_r * s


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), s=st.floats(0.01, 100), norm=st.sampled_from(["linf", "l2"]))
def test_scale_equivariance_general_factor(seed, s, norm):
    ds = random_set(seed)
    scaled = make(ds.features * s, ds.labels, ds.class_count)
    assert min_class_separation(scaled, norm).two_r == pytest.approx(
        min_class_separation(ds, norm).two_r * s, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), perm_seed=st.integers(0, 10**6), norm=st.sampled_from(["linf", "l2"]))
def test_permutation_invariance(seed, perm_seed, norm):
    ds = random_set(seed)
    perm = np.random.default_rng(perm_seed).permutation(ds.n)
    shuffled = make(ds.features[perm], ds.labels[perm], ds.class_count)
    assert min_class_separation(shuffled, norm).two_r == min_class_separation(ds, norm).two_r


def test_thread_count_invariance():
    ds = synth_2d("two_moons", 3000, 0.1, seed=2)
    base = min_class_separation(ds, "linf", threads=1)
    for t in (2, 4, 8):
        got = min_class_separation(ds, "linf", threads=t)
        assert (got.two_r, got.witness) == (base.two_r, base.witness)


def test_min_margin_equals_two_r_and_bounds_all_margins():
    ds = random_set(5, n=150, d=4, k=3)
    for norm in ("linf", "l2"):
        margins = per_point_margins(ds, norm)
        two_r = min_class_separation(ds, norm).two_r
        assert margins.min() == two_r
        assert np.all(margins >= two_r)


def test_byte_denominator_reports_fraction_of_255():
    rng = np.random.default_rng(0)
    X = rng.integers(0, 256, (60, 30)).astype(np.float64)
    labels = np.arange(60) % 10
    res = separation_arrays(X, labels, "linf", denominator=255)
    ref = min_class_separation_oracle(make(X / 255.0, labels, 10), "linf")
    assert res.two_r == pytest.approx(ref.two_r, abs=1e-12)
    assert round(res.two_r * 255) == pytest.approx(res.two_r * 255, abs=1e-9)


def test_json_shape_and_round_trip():
    res = min_class_separation(make([[0, 0], [0.5, 0.25]], [0, 1]), "linf")
    doc = res.to_json()
    assert set(doc) == {"two_r", "epsilon_min", "witness", "norm", "pairs_examined", "pairs_pruned",
                        "wall_time_ms"}
    json.dumps(doc)
    back = SeparationResult.from_json(doc)
    assert (back.two_r, back.witness, back.norm) == (res.two_r, res.witness, res.norm)
