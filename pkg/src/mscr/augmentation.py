"""Uniform corruptions inside Lp balls around data points.

Every parent point owns an RNG substream keyed by ``(seed, parent_index)``.
A parent's samples are drawn one row at a time from that stream, so the first
``k1`` samples are identical whether ``k1`` or a larger ``k2`` is requested,
and the output never depends on how parents are scheduled.

Offsets are generated for the unit ball and scaled by the radius afterwards;
experiments reuse one offset draw for every radius on a grid.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .dataset import Dataset, concat
from .errors import ValidationError
from .norms import Norm


@dataclass(frozen=True)
class AugmentationConfig:
    epsilon: float
    k: int = 10
    norm: Norm = Norm.LINF
    clip_to_unit: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "norm", Norm.parse(self.norm))
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValidationError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k}")


def parent_rng(seed, parent_index):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(parent_index),))
    return np.random.Generator(np.random.PCG64(ss))


def _unit_draw(rng, k, d, norm):
    """``k`` uniform samples from the unit ball of ``norm`` in ``d`` dimensions."""
    if norm is Norm.LINF:
        return 2.0 * rng.random((k, d)) - 1.0
    # one extra normal per row turns into the radius quantile via the normal CDF
    z = rng.standard_normal((k, d + 1))
    direction = z[:, :d]
    length = np.sqrt(np.einsum("ij,ij->i", direction, direction))
    length[length == 0] = 1.0
    u = 1.0 - ndtr(z[:, d])
    radius = u ** (1.0 / d)
    return direction * (radius / length)[:, None]


def sample_ball(center, epsilon, norm, rng):
    """One uniform sample from the ``norm`` ball of radius ``epsilon`` around ``center``."""
    center = np.asarray(center, dtype=np.float64)
    if epsilon == 0:
        return center.copy()
    return center + epsilon * _unit_draw(rng, 1, center.shape[0], Norm.parse(norm))[0]


def unit_offsets(n, d, k, norm, seed, start=0):
    """Array ``(n, k, d)`` of unit-ball offsets for parents ``start..start+n-1``."""
    norm = Norm.parse(norm)
    out = np.empty((n, k, d))
    for i in range(n):
        out[i] = _unit_draw(parent_rng(seed, start + i), k, d, norm)
    return out


def apply_offsets(dataset, offsets, epsilon, clip_to_unit=False):
    """Augmented dataset ``x_i + epsilon * offsets[i, s]`` for every parent/sample."""
    n, k, d = offsets.shape
    if n != dataset.n or d != dataset.d:
        raise ValidationError("offset array does not match the dataset shape")
    pts = dataset.features[:, None, :] + epsilon * offsets
    pts = pts.reshape(n * k, d)
    if clip_to_unit:
        np.clip(pts, 0.0, 1.0, out=pts)
    return Dataset(
        pts,
        np.repeat(dataset.labels, k),
        dataset.class_count,
        name=f"{dataset.name}+aug(eps={epsilon:g},k={k})",
        label_names=dataset.label_names,
        parent_index=np.repeat(np.arange(n), k),
        sample_ordinal=np.tile(np.arange(1, k + 1), n),
    )


def augment(dataset, config):
    """``n * k`` corrupted copies; sample ``s`` of parent ``i`` keeps label ``y_i``."""
    offsets = unit_offsets(dataset.n, dataset.d, config.k, config.norm, config.seed)
    return apply_offsets(dataset, offsets, config.epsilon, config.clip_to_unit)


def with_clean(dataset, augmented):
    """Clean points (ordinal 0) followed by their augmentations."""
    clean = Dataset(dataset.features, dataset.labels, dataset.class_count, name=dataset.name,
                    label_names=dataset.label_names, parent_index=np.arange(dataset.n),
                    sample_ordinal=np.zeros(dataset.n, dtype=np.int64))
    return concat([clean, augmented], name=augmented.name)


def export_csv(dataset, path):
    """Write ``parent_index, sample_ordinal, label, x0..`` rows for external scoring."""
    if dataset.parent_index is None:
        raise ValidationError("dataset carries no parent indices; augment it first")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parent_index", "sample_ordinal", "label"] + [f"x{j}" for j in range(dataset.d)])
        for p, s, y, row in zip(dataset.parent_index, dataset.sample_ordinal, dataset.labels,
                                dataset.features):
            w.writerow([int(p), int(s), int(y)] + [repr(float(v)) for v in row])
    return path


def read_export(path):
    """Inverse of :func:`export_csv`; returns ``(parent, ordinal, labels, features)``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:3] != ["parent_index", "sample_ordinal", "label"]:
        raise ValidationError(f"{path}: not an augmented-dataset export")
    body = np.asarray(rows[1:], dtype=np.float64).reshape(len(rows) - 1, -1)
    return (body[:, 0].astype(np.int64), body[:, 1].astype(np.int64),
            body[:, 2].astype(np.int64), body[:, 3:])
