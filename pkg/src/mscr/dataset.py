"""Classification datasets: loading, normalization, synthesis and splitting."""
from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DatasetError, ValidationError

CIFAR_RECORD_BYTES = 1 + 3072
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix plus dense integer labels.

    ``parent_index``/``sample_ordinal`` are set on augmented datasets so every
    point can be traced back to the clean point it was sampled around
    (ordinal 0 is the clean point itself).
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"
    label_names: Optional[tuple] = None
    norm_min: Optional[np.ndarray] = None
    norm_max: Optional[np.ndarray] = None
    parent_index: Optional[np.ndarray] = None
    sample_ordinal: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValidationError(f"labels shape {y.shape} does not match {X.shape[0]} rows")
        if self.class_count < 2:
            raise ValidationError("class_count must be at least 2")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise ValidationError(f"labels must lie in [0, {self.class_count})")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        for name in ("parent_index", "sample_ordinal"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.ascontiguousarray(arr, dtype=np.int64)
                if arr.shape != y.shape:
                    raise ValidationError(f"{name} must have one entry per row")
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(name={self.name!r}, n={self.n}, d={self.d}, class_count={self.class_count})"

    def present_classes(self):
        return np.unique(self.labels)

    def subset(self, index, name=None):
        index = np.asarray(index)
        pick = lambda a: None if a is None else a[index]
        return Dataset(
            self.features[index],
            self.labels[index],
            self.class_count,
            name=name or self.name,
            label_names=self.label_names,
            norm_min=self.norm_min,
            norm_max=self.norm_max,
            parent_index=pick(self.parent_index),
            sample_ordinal=pick(self.sample_ordinal),
            meta=dict(self.meta),
        )

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.asarray(self.features.shape, dtype=np.int64).tobytes())
        h.update(self.features.tobytes())
        h.update(self.labels.tobytes())
        return h.hexdigest()[:16]

    def require_two_classes(self):
        if self.n < 2 or len(self.present_classes()) < 2:
            raise ValidationError(
                f"{self.name}: need at least two points from two different classes"
            )


def normalize(features):
    """Per-column min-max scaling into [0, 1].

    Returns ``(scaled, col_min, col_max)``; zero-range columns map to 0.0.
    """
    X = np.asarray(features, dtype=np.float64)
    lo = X.min(axis=0) if X.shape[0] else np.zeros(X.shape[1])
    hi = X.max(axis=0) if X.shape[0] else np.zeros(X.shape[1])
    span = hi - lo
    flat = span == 0
    out = np.empty_like(X)
    ok = ~flat
    out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
    out[:, flat] = 0.0
    return out, lo, hi


def from_arrays(features, labels, name="dataset", normalized=True, class_count=None):
    """Build a Dataset from raw arrays, min-max normalizing unless told not to.

    Arbitrary labels are mapped to dense integers in sorted order.
    """
    X = np.asarray(features, dtype=np.float64)
    raw = np.asarray(labels)
    names, y = np.unique(raw, return_inverse=True)
    if class_count is None:
        class_count = max(len(names), 2)
    if normalized:
        X, lo, hi = normalize(X)
    else:
        lo = hi = None
    return Dataset(X, y.reshape(-1), class_count, name=name,
                   label_names=tuple(names.tolist()), norm_min=lo, norm_max=hi)


def _resolve_label_column(label_column, header, width):
    if label_column is None:
        return width - 1
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None:
            raise DatasetError(f"label column {label_column!r} given by name but file has no header")
        try:
            return header.index(label_column)
        except ValueError:
            raise DatasetError(f"label column {label_column!r} not in header {header}") from None
    idx = int(label_column)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise DatasetError(f"label column index {label_column} out of range for {width} columns")
    return idx


def _parse_float(cell):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(path, label_column=None, normalize_features=True, name=None):
    """Load a comma-separated dataset (optional header, last column = label by default).

    With ``normalize_features`` the columns are min-max scaled and the
    per-column min/max are kept on the Dataset; otherwise the values must
    already lie in [0, 1].
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetError(f"{path}: empty file")

    first = rows[0][1]
    width = len(first)
    by_name = isinstance(label_column, str) and not label_column.lstrip("-").isdigit()
    if by_name:
        has_header = True
    else:
        probe = _resolve_label_column(label_column, None, width)
        has_header = any(_parse_float(c.strip()) is None for j, c in enumerate(first) if j != probe)
    header = [c.strip() for c in first] if has_header else None
    if has_header:
        rows = rows[1:]
    col = _resolve_label_column(label_column, header, width)

    feats, labels = [], []
    for line, row in rows:
        if len(row) != width:
            raise DatasetError(f"expected {width} columns, found {len(row)}", line=line)
        vals = []
        for j, cell in enumerate(row):
            if j == col:
                continue
            v = _parse_float(cell.strip())
            if v is None:
                raise DatasetError(f"cannot parse {cell!r} as a finite number", line=line)
            vals.append(v)
        feats.append(vals)
        labels.append(row[col].strip())
    if not feats:
        raise DatasetError(f"{path}: no data rows")

    raw_labels = np.asarray(labels)
    try:
        numeric = np.asarray([float(v) for v in labels])
        if np.all(numeric == np.round(numeric)):
            raw_labels = numeric.astype(np.int64)
    except ValueError:
        pass
    if len(np.unique(raw_labels)) < 2:
        raise DatasetError(f"{path}: only one class present; separation is undefined")

    X = np.asarray(feats, dtype=np.float64)
    if not normalize_features and (X.min() < 0 or X.max() > 1):
        raise DatasetError(f"{path}: features outside [0, 1] and normalization disabled")
    return from_arrays(X, raw_labels, name=name or path.stem, normalized=normalize_features)


def write_csv(dataset, path, header=True):
    """Write features and labels; floats use shortest round-trip repr."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{j}" for j in range(dataset.d)] + ["label"])
        for row, lab in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])
    return path


def _read_cifar_file(path):
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % CIFAR_RECORD_BYTES:
        raise DatasetError(
            f"{path}: size {raw.size} is not a positive multiple of the {CIFAR_RECORD_BYTES}-byte record"
        )
    rec = raw.reshape(-1, CIFAR_RECORD_BYTES)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise DatasetError(f"{path}: label byte {labels.max()} outside 0..9")
    return rec[:, 1:], labels


def load_cifar10_binary(directory, include="both", as_bytes=False):
    """Read the CIFAR-10 binary batches (label byte + 3072 RGB-planar pixel bytes).

    Pixels are scaled by 1/255. ``as_bytes=True`` returns the raw uint8 matrix
    and labels instead, which the separation kernels can consume directly.
    """
    directory = Path(directory)
    files = {"train": CIFAR_TRAIN_FILES, "test": CIFAR_TEST_FILES,
             "both": CIFAR_TRAIN_FILES + CIFAR_TEST_FILES}.get(include)
    if files is None:
        raise ValidationError(f"include must be train, test or both, not {include!r}")
    missing = [f for f in files if not (directory / f).is_file()]
    if missing:
        raise DatasetError(f"{directory}: missing CIFAR-10 batch files {missing}")
    parts = [_read_cifar_file(directory / f) for f in files]
    pixels = np.concatenate([p for p, _ in parts])
    labels = np.concatenate([lab for _, lab in parts])
    if as_bytes:
        return pixels, labels
    X = pixels.astype(np.float64)
    X /= 255.0
    return Dataset(X, labels, 10, name=f"cifar10-{include}")


def _moons(n, rng):
    n_out = n // 2
    n_in = n - n_out
    t_out = rng.uniform(0.0, np.pi, n_out)
    t_in = rng.uniform(0.0, np.pi, n_in)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)])
    return np.vstack([outer, inner]), np.repeat([0, 1], [n_out, n_in])


def _blobs(n, rng):
    n0 = n // 2
    r = 0.3 * np.sqrt(rng.uniform(0.0, 1.0, n))
    phi = rng.uniform(0.0, 2 * np.pi, n)
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    y = np.repeat([0, 1], [n0, n - n0])
    pts[:, 0] += np.where(y == 0, -1.0, 1.0)
    return pts, y


def _rings(n, rng):
    n0 = n // 2
    y = np.repeat([0, 1], [n0, n - n0])
    phi = rng.uniform(0.0, 2 * np.pi, n)
    radius = np.where(y == 0, 1.0, 0.5)
    return np.column_stack([radius * np.cos(phi), radius * np.sin(phi)]), y


BAND_GAP = 0.02


def _diagonal_band(n, rng, spread):
    """Two classes on either side of the unit square's diagonal.

    Every point sits at perpendicular distance ``BAND_GAP / 2 + Exp(spread)``
    from the diagonal, so the classes are separable by a margin but crowd
    against it, where axis-aligned splits struggle.
    """
    t = rng.uniform(0.0, 1.0, n)
    y = rng.integers(0, 2, n)
    offset = (BAND_GAP / 2 + rng.exponential(spread, n)) * np.where(y == 1, 1.0, -1.0)
    along = np.column_stack([t, t])
    across = np.column_stack([-offset, offset]) / np.sqrt(2.0)
    return along + across, y


_SYNTH = {"two_moons": _moons, "moons": _moons, "blobs": _blobs, "rings": _rings, "circles": _rings}
# generators that consume ``noise`` themselves instead of getting Gaussian jitter
_SHAPED = {"diagonal_band": _diagonal_band}


def synth_2d(kind, n, noise=0.0, seed=0):
    """Deterministic two-class 2-D toy data, min-max normalized.

    ``noise`` is the standard deviation of isotropic Gaussian jitter in the
    generator's native units (moons have radius 1). For ``diagonal_band`` it
    is instead the mean extra distance of points beyond the margin, so the
    classes stay separable for every ``noise``.
    """
    if n < 4:
        raise ValidationError("synth_2d needs n >= 4")
    if noise < 0:
        raise ValidationError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    if kind in _SHAPED:
        X, y = _SHAPED[kind](n, rng, noise)
    elif kind in _SYNTH:
        X, y = _SYNTH[kind](n, rng)
        if noise > 0:
            X = X + rng.normal(0.0, noise, X.shape)
    else:
        raise ValidationError(
            f"unknown synthetic kind {kind!r}; choose from {sorted({**_SYNTH, **_SHAPED})}")
    ds = from_arrays(X, y, name=f"{kind}-n{n}-s{seed}")
    return ds


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError("test_fraction must lie strictly between 0 and 1")


def _test_count(n, fraction):
    k = int(math.floor(n * fraction + 0.5))
    if k < 1 or k > n - 1:
        raise ValidationError(f"test_fraction {fraction} leaves an empty partition for n={n}")
    return k


def split_indices(labels, spec):
    """Return ``(train_idx, test_idx)``, both sorted ascending."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    n_test = _test_count(n, spec.test_fraction)
    rng = np.random.default_rng(spec.seed)
    classes, counts = np.unique(labels, return_counts=True)

    if spec.stratified and counts.min() < 2:
        warnings.warn("stratified split impossible (a class has one member); using unstratified split",
                      RuntimeWarning, stacklevel=3)
    if not spec.stratified or counts.min() < 2:
        perm = rng.permutation(n)
        test = np.sort(perm[:n_test])
        train = np.sort(perm[n_test:])
        return train, test

    # largest-remainder allocation of the test quota to classes
    quota = counts * (n_test / n)
    take = np.floor(quota).astype(np.int64)
    rem = n_test - take.sum()
    order = np.lexsort((classes, -(quota - take)))
    take[order[:rem]] += 1
    take = np.clip(take, 1, counts - 1)
    test_parts = []
    for c, t in zip(classes, take):
        members = np.flatnonzero(labels == c)
        test_parts.append(rng.permutation(members)[:t])
    test = np.sort(np.concatenate(test_parts))
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask), test


def split(dataset, spec):
    train_idx, test_idx = split_indices(dataset.labels, spec)
    return (dataset.subset(train_idx, name=f"{dataset.name}/train"),
            dataset.subset(test_idx, name=f"{dataset.name}/test"))


def concat(parts: Sequence[Dataset], name=None):
    """Stack datasets sharing a class universe."""
    first = parts[0]
    has_parent = all(p.parent_index is not None for p in parts)
    return Dataset(
        np.vstack([p.features for p in parts]),
        np.concatenate([p.labels for p in parts]),
        first.class_count,
        name=name or first.name,
        label_names=first.label_names,
        parent_index=np.concatenate([p.parent_index for p in parts]) if has_parent else None,
        sample_ordinal=np.concatenate([p.sample_ordinal for p in parts]) if has_parent else None,
    )
