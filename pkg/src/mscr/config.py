"""Experiment plan files (YAML, schema version 1).

Example::

    schema_version: 1
    dataset: {source: synth, kind: two_moons, n: 4000, noise: 0.1, seed: 1}
    split: {test_fraction: 0.2, stratified: true}
    norm: linf
    eps_train: [0, 0.002, 0.004, 0.008]
    eps_test: [0, 0.002, 0.004, 0.008]
    include_eps_min: true
    k_train: 10
    k_test: 10
    runs: 200
    master_seed: 0
    clip_to_unit: false          # default: true for image data only
    eps_units: absolute          # or eps_min: grid values are multiples of eps_min
    models:
      - {id: rf, kind: random_forest, trees: 100}
      - {id: 1nn, kind: knn, neighbors: 1}
    kstudy: {k: [1, 2, 5, 10, 20, 50, 100]}   # optional

``dataset.source`` is ``synth`` (kind/n/noise/seed), ``csv`` (path,
label_column) or ``cifar10`` (path, include). A top-level ``preset: <name>``
starts from a named plan; any other key then overrides it, with ``dataset``
and ``split`` merged key by key.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .classifiers import ModelSpec
from .dataset import SplitSpec
from .errors import ConfigError, ValidationError
from .experiment import DataSource, ExperimentPlan
from .presets import PRESETS
from .report import config_hash

SCHEMA_VERSION = 1

_MODEL_KEYS = {
    "id": "id", "kind": "kind", "seed": "seed",
    "neighbors": "knn_neighbors", "knn_neighbors": "knn_neighbors",
    "trees": "rf_trees", "rf_trees": "rf_trees",
    "max_depth": "rf_max_depth", "rf_max_depth": "rf_max_depth",
    "min_leaf": "rf_min_leaf", "rf_min_leaf": "rf_min_leaf",
    "feature_subsample": "rf_feature_subsample", "rf_feature_subsample": "rf_feature_subsample",
    "path": "external_path", "external_path": "external_path",
}
_PLAN_KEYS = ("norm", "eps_train", "eps_test", "eps_units", "include_eps_min", "k_train", "k_test", "runs",
              "master_seed", "clip_to_unit")
_TOP_KEYS = {"schema_version", "preset", "dataset", "split", "models", "kstudy", *_PLAN_KEYS}


@dataclass(frozen=True)
class KStudySettings:
    k: tuple = (1, 2, 5, 10, 20, 50, 100)
    eps_train: Optional[float] = None
    eps_test: Optional[float] = None
    model: int = 0


@dataclass(frozen=True)
class LoadedConfig:
    plan: ExperimentPlan
    kstudy: KStudySettings = field(default_factory=KStudySettings)
    source_text: str = ""

    @property
    def config_hash(self):
        return config_hash(self.plan)


def _model(entry):
    if not isinstance(entry, dict):
        raise ConfigError(f"model entries must be mappings, got {entry!r}")
    kw = {}
    for k, v in entry.items():
        if k not in _MODEL_KEYS:
            raise ConfigError(f"unknown model key {k!r}")
        kw[_MODEL_KEYS[k]] = v
    if kw.get("kind") in ("rf", "forest"):
        kw["kind"] = "random_forest"
    if kw.get("kind") in ("nn", "1nn"):
        kw["kind"] = "knn"
    return ModelSpec(**kw)


def _datasource(entry):
    entry = dict(entry or {})
    allowed = {f.name for f in fields(DataSource)}
    if "dir" in entry:
        entry["path"] = entry.pop("dir")
    unknown = set(entry) - allowed
    if unknown:
        raise ConfigError(f"unknown dataset keys {sorted(unknown)}")
    return DataSource(**entry)


def plan_from_mapping(doc, seed=None):
    """Build a plan (and k-study settings) from a parsed config mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        base = {}
        if "preset" in doc:
            name = doc["preset"]
            if name not in PRESETS:
                raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
            base = PRESETS[name]().to_json()
        kw = dict(base)
        if "dataset" in doc or "data" in kw:
            kw["data"] = _datasource({**kw.get("data", {}), **(doc.get("dataset") or {})})
        if "split" in doc or "split" in kw:
            kw["split"] = SplitSpec(**{**kw.get("split", {}), **(doc.get("split") or {})})
        if "models" in doc:
            kw["models"] = tuple(_model(m) for m in doc["models"])
        elif "models" in kw:
            kw["models"] = tuple(ModelSpec(**m) for m in kw["models"])
        for key in _PLAN_KEYS:
            if key in doc:
                kw[key] = doc[key]
        if seed is not None:
            kw["master_seed"] = int(seed)
        plan = ExperimentPlan(**kw)
        ks = doc.get("kstudy") or {}
        kstudy = KStudySettings(**{**ks, "k": tuple(ks.get("k", KStudySettings.k))})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ConfigError(str(exc)) from exc
    return plan, kstudy


def load_config(path, seed=None):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    plan, kstudy = plan_from_mapping(doc, seed=seed)
    return LoadedConfig(plan, kstudy, text)
