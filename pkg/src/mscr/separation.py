"""Minimal inter-class distance (2r) and the corner-case radius eps_min = r."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import UndefinedSeparationError
from .kernels import separation as _kern
from .norms import Norm, distances_to


@dataclass(frozen=True)
class SeparationResult:
    two_r: float
    epsilon_min: float
    witness: tuple
    norm: Norm
    pairs_examined: int
    pairs_pruned: int
    wall_time_ms: float = 0.0

    @property
    def degenerate(self):
        return self.two_r == 0.0

    def to_json(self):
        return {
            "two_r": self.two_r,
            "epsilon_min": self.epsilon_min,
            "witness": [int(self.witness[0]), int(self.witness[1])],
            "norm": self.norm.label,
            "pairs_examined": int(self.pairs_examined),
            "pairs_pruned": int(self.pairs_pruned),
            "wall_time_ms": round(float(self.wall_time_ms), 3),
        }

    @classmethod
    def from_json(cls, d):
        return cls(float(d["two_r"]), float(d["epsilon_min"]), tuple(int(i) for i in d["witness"]),
                   Norm.parse(d["norm"]), int(d["pairs_examined"]), int(d["pairs_pruned"]),
                   float(d.get("wall_time_ms", 0.0)))


def _check(labels):
    labels = np.asarray(labels)
    if labels.shape[0] < 2 or np.unique(labels).size < 2:
        raise UndefinedSeparationError("separation needs points from at least two classes")
    return labels


def _result(value, i, j, norm, examined, pruned, t0, denominator):
    two_r = float(np.sqrt(value)) if norm is Norm.L2 else float(value)
    if denominator != 1:
        two_r = two_r / denominator
    if two_r == 0.0:
        warnings.warn(f"points {i} and {j} coincide but carry different labels; "
                      "separation is 0 and eps_min degenerates to 0", RuntimeWarning, stacklevel=3)
    return SeparationResult(two_r, two_r / 2, (int(i), int(j)), norm, int(examined), int(pruned),
                            (time.perf_counter() - t0) * 1e3)


def separation_oracle_arrays(X, labels, norm, denominator=1):
    """Exhaustive scan of every inter-class pair in lexicographic order."""
    norm = Norm.parse(norm)
    labels = _check(labels)
    t0 = time.perf_counter()
    X = np.asarray(X)
    n = X.shape[0]
    best, bi, bj = np.inf, -1, -1
    examined = 0
    for i in range(n - 1):
        js = np.flatnonzero(labels[i + 1:] != labels[i]) + i + 1
        if js.size == 0:
            continue
        examined += js.size
        diff = X[js].astype(np.float64) - X[i].astype(np.float64)
        if norm is Norm.L2:
            vals = np.cumsum(diff * diff, axis=1)[:, -1]
        else:
            vals = np.abs(diff).max(axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, bi, bj = float(vals[k]), i, int(js[k])
    return _result(best, bi, bj, norm, examined, 0, t0, denominator)


def min_class_separation_oracle(dataset, norm):
    """Brute-force reference: exact 2r with the lexicographically smallest witness."""
    return separation_oracle_arrays(dataset.features, dataset.labels, norm)


def separation_arrays(X, labels, norm, threads=1, use_numba=None, denominator=1):
    """Pruned exact search on raw arrays.

    ``X`` may be any real or unsigned-integer matrix; ``denominator`` rescales
    the final distance (CIFAR bytes use 255 so 2r comes out in [0, 1] units).
    """
    norm = Norm.parse(norm)
    labels = _check(labels)
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    t0 = time.perf_counter()
    X = np.ascontiguousarray(X)
    l2 = norm is Norm.L2
    bound = _kern.heuristic_bound(X, labels, l2)
    value, i, j, examined, pruned = _kern.scan(
        X, labels, l2, threads=threads, use_numba=use_numba, initial_bound=bound)
    return _result(value, i, j, norm, examined, pruned, t0, denominator)


def min_class_separation(dataset, norm, threads=1, use_numba=None):
    """Exact minimal inter-class distance using the tiled, pruned kernel.

    Agrees bit-for-bit with :func:`min_class_separation_oracle` on ``two_r``;
    among exact ties the witness is the lexicographically smallest pair.
    """
    return separation_arrays(dataset.features, dataset.labels, norm,
                             threads=threads, use_numba=use_numba)


def per_point_margin(dataset, norm, point_index):
    """Distance from one point to the nearest point of any other class."""
    norm = Norm.parse(norm)
    y = dataset.labels
    if not 0 <= point_index < dataset.n:
        raise IndexError(f"point {point_index} out of range for n={dataset.n}")
    other = y != y[point_index]
    if not other.any():
        raise UndefinedSeparationError("no point of a different class")
    return float(distances_to(dataset.features[other], dataset.features[point_index], norm).min())


def per_point_margins(dataset, norm):
    return np.array([per_point_margin(dataset, norm, i) for i in range(dataset.n)])
