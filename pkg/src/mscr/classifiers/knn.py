"""k-nearest-neighbour classifier on a KD-tree."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..norms import Norm


class KNN:
    """Majority vote over the ``k`` nearest training points; ties go to the smallest label."""

    def __init__(self, X, y, n_classes, k=1, norm=Norm.LINF):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.int64)
        self.n_classes = int(n_classes)
        self.k = int(min(k, self.X.shape[0]))
        self.norm = Norm.parse(norm)
        self._tree = cKDTree(self.X)

    def predict(self, points, workers=1):
        points = np.ascontiguousarray(points, dtype=np.float64)
        _, nn = self._tree.query(points, k=self.k, p=self.norm.minkowski_p, workers=workers)
        if self.k == 1:
            return self.y[nn]
        lab = self.y[nn]
        votes = np.zeros((points.shape[0], self.n_classes), dtype=np.int64)
        np.add.at(votes, (np.repeat(np.arange(points.shape[0]), self.k), lab.ravel()), 1)
        return np.argmax(votes, axis=1).astype(np.int64)
