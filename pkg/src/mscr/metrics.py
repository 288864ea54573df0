"""Accuracy, MSCR and run-aggregated confidence intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import UndefinedMSCRError, ValidationError

CI_METHOD = "student-t, two-sided, sample standard deviation"


def accuracy(predictions, truth):
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValidationError(f"length mismatch: {predictions.shape} vs {truth.shape}")
    if truth.size == 0:
        raise ValidationError("accuracy of an empty prediction set is undefined")
    return float(np.count_nonzero(predictions == truth)) / truth.size


def mscr(acc_robust_at_eps_min, acc_clean):
    """Relative change from clean accuracy to robust accuracy at eps_min.

    Zero means no accuracy lost to eps_min noise, negative means the model is
    not robust enough, positive means corruptions fixed more errors than they
    caused.
    """
    for name, v in (("robust accuracy", acc_robust_at_eps_min), ("clean accuracy", acc_clean)):
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name} {v} outside [0, 1]")
    if acc_clean == 0:
        raise UndefinedMSCRError("MSCR is undefined when clean accuracy is 0")
    return (acc_robust_at_eps_min - acc_clean) / acc_clean


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    ci95_half_width: float
    n_runs: int
    level: float = 0.95

    @property
    def single_run(self):
        return self.n_runs == 1

    @property
    def low(self):
        return self.mean - self.ci95_half_width

    @property
    def high(self):
        return self.mean + self.ci95_half_width

    def to_json(self):
        return {"mean": self.mean, "ci95_half_width": self.ci95_half_width,
                "n_runs": self.n_runs, "single_run": self.single_run}


def mean_ci(values, level=0.95):
    """Mean with Student-t half-width ``t(level, n-1) * s / sqrt(n)``."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValidationError("mean_ci needs at least one value")
    m = math.fsum(v) / v.size
    if v.size == 1:
        return MetricSummary(m, 0.0, 1, level)
    s = float(np.std(v, ddof=1))
    half = float(stats.t.ppf(0.5 + level / 2, v.size - 1)) * s / math.sqrt(v.size)
    return MetricSummary(m, half, int(v.size), level)


def paired_difference(a, b, level=0.95):
    """CI of the mean of ``a - b`` over runs that share seeds."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError("paired samples must have equal length")
    return mean_ci(a - b, level)
