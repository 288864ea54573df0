"""End-to-end MSCR experiments over eps_train x eps_test grids and repeated runs.

Run ``r`` derives every random choice (split, training noise, test noise,
model seeds) from ``(master_seed, r)`` alone. Within a run, every model and
every eps_train sees the same split, the same unit-noise draws scaled to the
radius at hand, and the same model seed, so differences between grid cells
are not blurred by unrelated sampling noise.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import classifiers
from .augmentation import apply_offsets, read_export, unit_offsets
from .classifiers import ModelSpec
from .dataset import Dataset, SplitSpec, concat, load_cifar10_binary, load_csv, split, synth_2d
from .errors import ConfigError, MSCRError, RunError, UndefinedMSCRError, ValidationError
from .metrics import MetricSummary, accuracy, mean_ci, mscr
from .norms import Norm
from .separation import SeparationResult, min_class_separation

log = logging.getLogger(__name__)

_SPLIT, _TRAIN_NOISE, _TEST_NOISE, _MODEL = range(4)
EPS_UNITS = ("absolute", "eps_min")


def derive_seed(master_seed, *keys):
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class DataSource:
    source: str = "synth"
    kind: str = "two_moons"
    n: int = 4000
    noise: float = 0.1
    seed: int = 0
    path: Optional[str] = None
    label_column: Optional[str] = None
    include: str = "both"

    def load(self):
        if self.source == "synth":
            return synth_2d(self.kind, self.n, self.noise, self.seed)
        if self.source == "csv":
            if not self.path:
                raise ConfigError("csv data source needs a path")
            return load_csv(self.path, label_column=self.label_column)
        if self.source == "cifar10":
            if not self.path:
                raise ConfigError("cifar10 data source needs a path")
            return load_cifar10_binary(self.path, include=self.include)
        raise ConfigError(f"unknown data source {self.source!r}")

    @property
    def is_image(self):
        return self.source == "cifar10"


def _grid(values, name):
    vals = sorted({float(v) for v in values})
    if not vals:
        raise ValidationError(f"{name} grid must not be empty")
    if vals[0] < 0 or not np.all(np.isfinite(vals)):
        raise ValidationError(f"{name} grid must contain finite values >= 0")
    return vals


@dataclass(frozen=True)
class ExperimentPlan:
    data: DataSource = field(default_factory=DataSource)
    split: SplitSpec = field(default_factory=SplitSpec)
    norm: Norm = Norm.LINF
    eps_train: tuple = (0.0,)
    eps_test: tuple = (0.0,)
    include_eps_min: bool = True
    k_train: int = 10
    k_test: int = 10
    runs: int = 200
    models: tuple = (ModelSpec("random_forest"), ModelSpec("knn"))
    master_seed: int = 0
    clip_to_unit: Optional[bool] = None
    eps_units: str = "absolute"

    def __post_init__(self):
        if self.eps_units not in EPS_UNITS:
            raise ValidationError(f"eps_units must be one of {EPS_UNITS}, not {self.eps_units!r}")
        object.__setattr__(self, "norm", Norm.parse(self.norm))
        object.__setattr__(self, "eps_train", tuple(_grid(self.eps_train, "eps_train")))
        object.__setattr__(self, "eps_test", tuple(_grid(self.eps_test, "eps_test")))
        object.__setattr__(self, "models", tuple(self.models))
        if self.runs < 1:
            raise ValidationError("runs must be >= 1")
        if self.k_train < 1 or self.k_test < 1:
            raise ValidationError("k_train and k_test must be >= 1")
        if not self.models:
            raise ValidationError("plan needs at least one model")
        ids = [m.id for m in self.models]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"model ids must be unique, got {ids}")
        if any(m.kind == "external" for m in self.models):
            raise ValidationError("external predictions are scored with score_external, not run_experiment")

    @property
    def clip(self):
        return self.data.is_image if self.clip_to_unit is None else bool(self.clip_to_unit)

    def grids(self, eps_min):
        """Absolute eps_train and eps_test grids once eps_min is known."""
        scale = eps_min if self.eps_units == "eps_min" else 1.0
        extra = [eps_min] if self.include_eps_min else []
        return (_grid([e * scale for e in self.eps_train] + extra, "eps_train"),
                _grid([e * scale for e in self.eps_test] + extra, "eps_test"))

    def to_json(self):
        d = asdict(self)
        d["norm"] = self.norm.value
        d["eps_train"] = list(self.eps_train)
        d["eps_test"] = list(self.eps_test)
        d["models"] = [asdict(m) for m in self.models]
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        d["data"] = DataSource(**d["data"])
        d["split"] = SplitSpec(**d["split"])
        d["models"] = tuple(ModelSpec(**m) for m in d["models"])
        return cls(**d)


@dataclass
class RunRecord:
    model_id: str
    eps_train: float
    run_index: int
    acc_clean: float
    acc_robust: dict
    mscr: Optional[float] = None
    mscr_undefined: bool = False

    def to_json(self):
        return {"model_id": self.model_id, "eps_train": self.eps_train, "run_index": self.run_index,
                "acc_clean": self.acc_clean,
                "acc_robust": [[e, a] for e, a in sorted(self.acc_robust.items())],
                "mscr": self.mscr, "mscr_undefined": self.mscr_undefined}

    @classmethod
    def from_json(cls, d):
        return cls(d["model_id"], float(d["eps_train"]), int(d["run_index"]), float(d["acc_clean"]),
                   {float(e): float(a) for e, a in d["acc_robust"]},
                   None if d["mscr"] is None else float(d["mscr"]), bool(d.get("mscr_undefined")))


@dataclass
class Cell:
    model_id: str
    eps_train: float
    clean: MetricSummary
    robust: dict
    mscr: Optional[MetricSummary]
    runs_without_mscr: int = 0


@dataclass
class AccuracyMatrix:
    model_ids: list
    eps_train: list
    eps_test: list
    eps_min: float
    cells: dict
    mscr_requested: bool

    @classmethod
    def from_records(cls, records, model_ids, eps_train, eps_test, eps_min):
        grouped = {}
        for rec in records:
            grouped.setdefault((rec.model_id, rec.eps_train), []).append(rec)
        mscr_requested = eps_min in eps_test
        cells = {}
        for key, recs in grouped.items():
            recs = sorted(recs, key=lambda r: r.run_index)
            clean = mean_ci([r.acc_clean for r in recs])
            robust = {e: mean_ci([r.acc_robust[e] for r in recs]) for e in eps_test}
            vals = [r.mscr for r in recs if r.mscr is not None]
            cells[key] = Cell(key[0], key[1], clean, robust,
                              mean_ci(vals) if (mscr_requested and vals) else None,
                              len(recs) - len(vals) if mscr_requested else 0)
        return cls(list(model_ids), list(eps_train), list(eps_test), eps_min, cells, mscr_requested)

    def cell(self, model_id, eps_train):
        return self.cells[(model_id, eps_train)]

    def columns(self):
        return [(m, e) for m in self.model_ids for e in self.eps_train if (m, e) in self.cells]

    @staticmethod
    def is_diagonal(eps_train, eps_test):
        return eps_train == eps_test

    def best_per_row(self):
        """Column with the highest mean accuracy for every eps_test (first wins ties)."""
        out = {}
        for e in self.eps_test:
            best = None
            for col in self.columns():
                v = self.cells[col].robust[e].mean
                if best is None or v > best[1]:
                    best = (col, v)
            out[e] = best[0]
        return out

    def global_optimum(self):
        best = None
        for col in self.columns():
            for e in self.eps_test:
                v = self.cells[col].robust[e].mean
                if best is None or v > best[1]:
                    best = ((col[0], col[1], e), v)
        return best[0]

    def best_mscr(self):
        best = None
        for col in self.columns():
            s = self.cells[col].mscr
            if s is not None and (best is None or s.mean > best[1]):
                best = (col, s.mean)
        return None if best is None else best[0]


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    separation: SeparationResult
    matrix: AccuracyMatrix
    records: list
    dataset_fingerprint: str

    @property
    def eps_min(self):
        return self.separation.epsilon_min


def _augmented_train(train, offsets, eps, clip):
    if eps == 0:
        return train
    return concat([train, apply_offsets(train, offsets, eps, clip)], name=train.name)


def run_single(plan, dataset, run_index, eps_min, eps_train, eps_test):
    """All (model, eps_train) records of one run."""
    norm = plan.norm
    split_spec = replace(plan.split, seed=derive_seed(plan.master_seed, run_index, _SPLIT))
    train, test = split(dataset, split_spec)
    clip = plan.clip

    test_sets = {}
    if any(e > 0 for e in eps_test):
        off = unit_offsets(test.n, test.d, plan.k_test, norm,
                           derive_seed(plan.master_seed, run_index, _TEST_NOISE))
        test_sets = {e: apply_offsets(test, off, e, clip) for e in eps_test if e > 0}
    train_off = None
    if any(e > 0 for e in eps_train):
        train_off = unit_offsets(train.n, train.d, plan.k_train, norm,
                                 derive_seed(plan.master_seed, run_index, _TRAIN_NOISE))

    records = []
    for mi, spec in enumerate(plan.models):
        spec_r = spec.with_seed(derive_seed(plan.master_seed, run_index, _MODEL, mi, spec.seed))
        for e_tr in eps_train:
            model = classifiers.train(spec_r, _augmented_train(train, train_off, e_tr, clip), norm)
            acc_clean = accuracy(classifiers.predict(model, test.features), test.labels)
            robust = {}
            for e in eps_test:
                if e == 0:
                    robust[e] = acc_clean
                else:
                    ts = test_sets[e]
                    robust[e] = accuracy(classifiers.predict(model, ts.features), ts.labels)
            value, undefined = None, False
            if eps_min in robust:
                try:
                    value = mscr(robust[eps_min], acc_clean)
                except UndefinedMSCRError:
                    undefined = True
            records.append(RunRecord(spec.id, e_tr, run_index, acc_clean, robust, value, undefined))
    return records


def _map_runs(fn, runs, threads):
    threads = max(1, int(threads or 1))
    if threads == 1:
        return [fn(r) for r in runs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, runs))


def _guarded(fn):
    def call(r):
        try:
            return fn(r)
        except MSCRError:
            raise
        except Exception as exc:  # noqa: BLE001 - re-raised with the run index attached
            raise RunError(r, exc) from exc
    return call


def measure_separation(plan, dataset, threads=1):
    return min_class_separation(dataset, plan.norm, threads=threads)


def run_experiment(plan, threads=1, dataset=None, separation=None, progress=None):
    """Execute the full grid for ``plan.runs`` runs and aggregate the matrix."""
    dataset = dataset if dataset is not None else plan.data.load()
    dataset.require_two_classes()
    sep = separation if separation is not None else measure_separation(plan, dataset, threads)
    eps_min = sep.epsilon_min
    eps_train, eps_test = plan.grids(eps_min)
    log.info("eps_min=%g, eps_train=%s, eps_test=%s", eps_min, eps_train, eps_test)

    def one(r):
        recs = run_single(plan, dataset, r, eps_min, eps_train, eps_test)
        if progress is not None:
            progress(r)
        return recs

    per_run = _map_runs(_guarded(one), range(plan.runs), threads)
    records = [rec for recs in per_run for rec in recs]
    matrix = AccuracyMatrix.from_records(records, [m.id for m in plan.models], eps_train, eps_test, eps_min)
    return ExperimentResult(plan, sep, matrix, records, dataset.fingerprint())


@dataclass
class KStudyResult:
    k_values: list
    eps_train: float
    eps_test: float
    model_id: str
    summaries: dict
    per_run: dict

    def rows(self):
        return [(k, self.summaries[k]) for k in self.k_values]


def k_convergence_study(plan, k_candidates, eps_train=None, eps_test=None, model_index=0,
                        threads=1, dataset=None, separation=None):
    """Robust accuracy as a function of k (samples per test point).

    Test noise for the largest k is drawn once per run; smaller k use the
    leading samples of every parent, so larger k extends smaller k.
    """
    ks = [int(k) for k in k_candidates]
    if not ks or ks != sorted(ks) or ks[0] < 1 or len(set(ks)) != len(ks):
        raise ValidationError("k_candidates must be ascending, distinct and >= 1")
    dataset = dataset if dataset is not None else plan.data.load()
    if eps_train is None or eps_test is None:
        sep = separation if separation is not None else measure_separation(plan, dataset, threads)
        eps_train = sep.epsilon_min if eps_train is None else eps_train
        eps_test = sep.epsilon_min if eps_test is None else eps_test
    if eps_test <= 0:
        raise ValidationError("k-study needs eps_test > 0")
    spec = plan.models[model_index]
    kmax = ks[-1]

    def one(r):
        split_spec = replace(plan.split, seed=derive_seed(plan.master_seed, r, _SPLIT))
        train, test = split(dataset, split_spec)
        if eps_train > 0:
            toff = unit_offsets(train.n, train.d, plan.k_train, plan.norm,
                                derive_seed(plan.master_seed, r, _TRAIN_NOISE))
            train = _augmented_train(train, toff, eps_train, plan.clip)
        spec_r = spec.with_seed(derive_seed(plan.master_seed, r, _MODEL, model_index, spec.seed))
        model = classifiers.train(spec_r, train, plan.norm)
        off = unit_offsets(test.n, test.d, kmax, plan.norm,
                           derive_seed(plan.master_seed, r, _TEST_NOISE))
        aug = apply_offsets(test, off, eps_test, plan.clip)
        correct = (classifiers.predict(model, aug.features) == aug.labels).reshape(test.n, kmax)
        return [float(correct[:, :k].mean()) for k in ks]

    accs = np.asarray(_map_runs(_guarded(one), range(plan.runs), threads))
    per_run = {k: accs[:, i].tolist() for i, k in enumerate(ks)}
    summaries = {k: mean_ci(per_run[k]) for k in ks}
    return KStudyResult(ks, float(eps_train), float(eps_test), spec.id, summaries, per_run)


@dataclass(frozen=True)
class TradeoffPoint:
    eps_train: float
    clean: MetricSummary
    mscr: MetricSummary
    contradicts_tradeoff: bool


def tradeoff_curve(matrix, model_id):
    """Clean accuracy vs MSCR per eps_train, flagging points that beat the baseline on both."""
    cols = sorted(e for m, e in matrix.columns() if m == model_id)
    if len(cols) < 2:
        raise ValidationError(f"model {model_id!r} needs at least two eps_train values")
    if cols[0] != 0.0:
        raise ValidationError("tradeoff curve needs the eps_train = 0 baseline")
    base = matrix.cell(model_id, 0.0)
    if base.mscr is None:
        raise ValidationError("tradeoff curve needs MSCR values (eps_min must be tested)")
    out = []
    for e in cols:
        c = matrix.cell(model_id, e)
        flag = e > 0 and c.clean.mean > base.clean.mean and c.mscr.mean > base.mscr.mean
        out.append(TradeoffPoint(e, c.clean, c.mscr, flag))
    return out


@dataclass(frozen=True)
class OptimumRow:
    eps_test: float
    best_eps_train: float
    best_mean: float
    nearest_eps_train: float
    deviates: bool
    direction: Optional[str]


def _nearest(grid, value):
    return min(grid, key=lambda g: (abs(g - value), g))


def optima_report(matrix, model_id):
    """Best eps_train for each eps_test row and whether it leaves the diagonal."""
    cols = sorted(e for m, e in matrix.columns() if m == model_id)
    if not cols:
        raise ValidationError(f"no columns for model {model_id!r}")
    rows = []
    for e in matrix.eps_test:
        best_e, best_v = None, None
        for c in cols:
            v = matrix.cell(model_id, c).robust[e].mean
            if best_v is None or v > best_v:
                best_e, best_v = c, v
        near = _nearest(cols, e)
        dev = best_e != near
        direction = None
        if dev:
            direction = "eps_train>eps_test" if best_e > near else "eps_train<eps_test"
        rows.append(OptimumRow(e, best_e, best_v, near, dev, direction))
    return rows


def score_external(export_path, predictions_path, eps_min=None):
    """Clean/robust accuracy and MSCR for predictions made on an exported augmented set."""
    parent, ordinal, labels, _ = read_export(export_path)
    pred = classifiers.load_external_predictions(predictions_path).join(parent, ordinal)
    clean = ordinal == 0
    if not clean.any() or clean.all():
        raise ValidationError("export must contain clean (ordinal 0) and augmented rows")
    acc_c = accuracy(pred[clean], labels[clean])
    acc_r = accuracy(pred[~clean], labels[~clean])
    out = {"acc_clean": acc_c, "acc_robust": acc_r, "n_clean": int(clean.sum()),
           "n_augmented": int((~clean).sum())}
    try:
        out["mscr"] = mscr(acc_r, acc_c)
    except UndefinedMSCRError:
        out["mscr"] = None
    if eps_min is not None:
        out["epsilon"] = float(eps_min)
    return out


__all__ = [
    "DataSource", "ExperimentPlan", "RunRecord", "Cell", "AccuracyMatrix", "ExperimentResult",
    "run_experiment", "run_single", "k_convergence_study", "KStudyResult", "tradeoff_curve",
    "TradeoffPoint", "optima_report", "OptimumRow", "derive_seed", "score_external", "Dataset",
]
