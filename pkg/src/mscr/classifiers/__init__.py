"""Reference classifiers behind one train/predict interface.

``random_forest`` grows bagged Gini trees, ``knn`` votes among nearest
neighbours under the experiment's norm, and ``external`` wraps a prediction
file produced by some other model.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..errors import ValidationError
from ..norms import Norm
from .external import PredictionTable, load_external_predictions
from .forest import Forest, fit_forest
from .knn import KNN

KINDS = ("knn", "random_forest", "external")
MODEL_MAGIC = b"MSCRMODL"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "random_forest"
    id: Optional[str] = None
    knn_neighbors: int = 1
    rf_trees: int = 100
    rf_max_depth: Optional[int] = None
    rf_min_leaf: int = 1
    rf_feature_subsample: str = "sqrt"
    seed: int = 0
    external_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"model kind must be one of {KINDS}, not {self.kind!r}")
        if self.rf_trees < 1:
            raise ValidationError("rf_trees must be >= 1")
        if self.knn_neighbors < 1:
            raise ValidationError("knn_neighbors must be >= 1")
        if self.rf_min_leaf < 1:
            raise ValidationError("rf_min_leaf must be >= 1")
        if self.rf_max_depth is not None and self.rf_max_depth < 0:
            raise ValidationError("rf_max_depth must be >= 0")
        if self.kind == "external" and not self.external_path:
            raise ValidationError("external model needs external_path")
        if self.id is None:
            object.__setattr__(self, "id", self.default_id())

    def default_id(self):
        if self.kind == "knn":
            return f"{self.knn_neighbors}nn"
        if self.kind == "random_forest":
            return f"rf{self.rf_trees}"
        return "external"

    def with_seed(self, seed):
        d = asdict(self)
        d["seed"] = int(seed)
        return ModelSpec(**d)


@dataclass
class TrainedModel:
    spec: ModelSpec
    norm: Norm
    n_features: int
    n_classes: int
    training_set_fingerprint: str
    state: Any = field(repr=False, default=None)

    def predict(self, points):
        return predict(self, points)


def _fingerprint(X, y):
    h = hashlib.sha256()
    h.update(np.asarray(X.shape, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


def train(spec, train_set, norm=Norm.LINF, threads=1):
    """Fit ``spec`` on ``train_set`` (a Dataset); deterministic under ``spec.seed``."""
    norm = Norm.parse(norm)
    X, y = train_set.features, train_set.labels
    if spec.kind == "external":
        state = load_external_predictions(spec.external_path)
        return TrainedModel(spec, norm, train_set.d, train_set.class_count, "external", state)
    if X.shape[0] == 0:
        raise ValidationError("cannot train on an empty training set")
    fp = _fingerprint(X, y)
    if spec.kind == "knn":
        state = KNN(X, y, train_set.class_count, k=spec.knn_neighbors, norm=norm)
    else:
        state = fit_forest(X, y, train_set.class_count, n_trees=spec.rf_trees,
                           max_features=spec.rf_feature_subsample, max_depth=spec.rf_max_depth,
                           min_leaf=spec.rf_min_leaf, seed=spec.seed, threads=threads)
    return TrainedModel(spec, norm, X.shape[1], train_set.class_count, fp, state)


def predict(model, points):
    """One label per row of ``points``."""
    if model.spec.kind == "external":
        raise ValidationError("external models predict by identifier; use predict_ids")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != model.n_features:
        raise ValidationError(
            f"expected points with {model.n_features} columns, got shape {points.shape}")
    if points.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    return model.state.predict(points)


def predict_ids(model, parent_index, sample_ordinal):
    if model.spec.kind != "external":
        raise ValidationError("predict_ids is only defined for external models")
    return model.state.join(parent_index, sample_ordinal)


def _model_arrays(model):
    if model.spec.kind == "random_forest":
        return model.state.arrays()
    if model.spec.kind == "knn":
        return {"X": model.state.X, "y": model.state.y}
    raise ValidationError("external models are not serialized")


def serialize(model):
    """Self-describing bytes: magic, version, JSON header, raw little-endian arrays."""
    arrays = _model_arrays(model)
    layout, blobs, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        raw = a.tobytes()
        layout.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                       "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "spec": asdict(model.spec),
        "norm": model.norm.value,
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "training_set_fingerprint": model.training_set_fingerprint,
        "arrays": layout,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MODEL_MAGIC + struct.pack("<HI", MODEL_FORMAT_VERSION, len(hbytes)) + hbytes + b"".join(blobs)


def deserialize(blob):
    if blob[:8] != MODEL_MAGIC:
        raise ValidationError("not a serialized model (bad magic)")
    version, hlen = struct.unpack("<HI", blob[8:14])
    if version != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported model format version {version}")
    header = json.loads(blob[14:14 + hlen])
    body = memoryview(blob)[14 + hlen:]
    arrays = {}
    for item in header["arrays"]:
        raw = body[item["offset"]:item["offset"] + item["nbytes"]]
        arrays[item["name"]] = np.frombuffer(raw, dtype=np.dtype(item["dtype"])).reshape(item["shape"]).copy()
    spec = ModelSpec(**header["spec"])
    norm = Norm(header["norm"])
    if spec.kind == "random_forest":
        state = Forest(arrays["feature"], arrays["threshold"], arrays["left"], arrays["right"],
                       arrays["value"], arrays["offsets"], header["n_classes"], header["n_features"])
    else:
        state = KNN(arrays["X"], arrays["y"], header["n_classes"], k=spec.knn_neighbors, norm=norm)
    return TrainedModel(spec, norm, header["n_features"], header["n_classes"],
                        header["training_set_fingerprint"], state)


def save_model(model, path):
    Path(path).write_bytes(serialize(model))
    return Path(path)


def load_model(path):
    return deserialize(Path(path).read_bytes())


__all__ = [
    "ModelSpec", "TrainedModel", "train", "predict", "predict_ids", "serialize", "deserialize",
    "save_model", "load_model", "load_external_predictions", "PredictionTable", "Forest", "KNN",
]
