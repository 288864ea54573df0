from enum import Enum

import numpy as np


class Norm(str, Enum):
    """Distance used for separation, corruption balls and kNN."""

    LINF = "linf"
    L2 = "l2"

    @classmethod
    def parse(cls, value):
        if isinstance(value, Norm):
            return value
        key = str(value).strip().lower().replace("_", "")
        if key in {"linf", "inf", "l∞", "chebyshev", "max"}:
            return cls.LINF
        if key in {"l2", "2", "euclidean"}:
            return cls.L2
        raise ValueError(f"unknown norm {value!r} (expected 'linf' or 'l2')")

    @property
    def label(self):
        return "Linf" if self is Norm.LINF else "L2"

    @property
    def minkowski_p(self):
        return np.inf if self is Norm.LINF else 2.0


def distance(a, b, norm):
    """Distance between two points; L2 accumulates coordinates in order."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if Norm.parse(norm) is Norm.LINF:
        return float(np.max(np.abs(diff))) if diff.size else 0.0
    return float(np.sqrt(np.cumsum(diff * diff)[-1])) if diff.size else 0.0


def distances_to(points, center, norm):
    """Row-wise distances from ``points`` to ``center``."""
    diff = np.asarray(points, dtype=np.float64) - np.asarray(center, dtype=np.float64)
    if Norm.parse(norm) is Norm.LINF:
        return np.max(np.abs(diff), axis=-1)
    return np.sqrt(np.cumsum(diff * diff, axis=-1)[..., -1])
