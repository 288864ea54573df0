"""Bagged Gini random forest with hard majority voting."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import _accel
from ..kernels import tree as _tree


def tree_seeds(seed, tree_index):
    """Bootstrap generator and splitmix seed of one tree; depends only on (seed, tree)."""
    boot = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tree_index), 0))
    split = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tree_index), 1))
    return np.random.Generator(np.random.PCG64(boot)), int(split.generate_state(1, dtype=np.uint64)[0])


def resolve_max_features(rule, d):
    if rule in ("all", None):
        return d
    if rule == "sqrt":
        return max(1, int(np.sqrt(d)))
    if rule == "log2":
        return max(1, int(np.log2(d)))
    k = int(rule)
    if not 1 <= k <= d:
        raise ValueError(f"feature subsample {rule} outside 1..{d}")
    return k


@dataclass
class Forest:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray
    n_classes: int
    n_features: int

    @property
    def n_trees(self):
        return self.offsets.shape[0] - 1

    def tree(self, t):
        sl = slice(self.offsets[t], self.offsets[t + 1])
        return (self.feature[sl], self.threshold[sl], self.left[sl], self.right[sl], self.value[sl])

    def arrays(self):
        return {"feature": self.feature, "threshold": self.threshold, "left": self.left,
                "right": self.right, "value": self.value, "offsets": self.offsets}

    def predict(self, X, use_numba=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
        fn = _tree.predict_forest_numba if use_numba else _tree.predict_forest_numpy
        return fn(X, self.feature, self.threshold, self.left, self.right, self.value,
                  self.offsets, self.n_classes)

    def tree_predictions(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return np.stack([_tree.tree_apply_numpy(X, *self.tree(t)) for t in range(self.n_trees)])


def fit_forest(X, y, n_classes, n_trees=100, max_features="sqrt", max_depth=None, min_leaf=1,
               seed=0, threads=1, use_numba=None):
    """Grow ``n_trees`` trees on bootstrap resamples of size n.

    Tree ``t`` draws its bootstrap and feature choices from substreams keyed
    by ``(seed, t)``, so the forest is identical for any ``threads``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n, d = X.shape
    mf = resolve_max_features(max_features, d)
    depth = -1 if max_depth is None else int(max_depth)
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    order = _tree.presort_columns(X) if use_numba else None

    def grow(t):
        rng, split_seed = tree_seeds(seed, t)
        w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.int64)
        args = (X, y, w, int(n_classes), mf, depth, int(min_leaf), np.uint64(split_seed))
        if use_numba:
            return _tree.build_tree_numba(*args, order)
        return _tree.build_tree_numpy(*args)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, range(n_trees)))
    else:
        trees = [grow(t) for t in range(n_trees)]

    sizes = [tr[0].shape[0] for tr in trees]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    cat = [np.concatenate([tr[k] for tr in trees]) for k in range(5)]
    return Forest(*cat, offsets=offsets, n_classes=int(n_classes), n_features=d)
