"""Named experiment plans.

``synth-2d`` is a separable 2-D set whose points crowd against a narrow
margin along the diagonal, so the RF's axis-aligned boundary is visibly
fragile at eps_min while 1NN is not. ``synth-2d-fallback`` uses a tighter
crowd and a different seed. ``external-2d`` and ``cifar10`` expect the data path
to be supplied (``dataset: {path: ...}`` in a config, or a ``--csv`` /
``--cifar`` override where the subcommand supports it).
"""
from __future__ import annotations

from dataclasses import replace

from .classifiers import ModelSpec
from .dataset import SplitSpec
from .experiment import DataSource, ExperimentPlan

RF = ModelSpec("random_forest", id="rf", rf_trees=100)
NN1 = ModelSpec("knn", id="1nn", knn_neighbors=1)
RELATIVE_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def synth_2d():
    return ExperimentPlan(
        data=DataSource(source="synth", kind="diagonal_band", n=4000, noise=0.02, seed=1),
        split=SplitSpec(test_fraction=0.2), eps_units="eps_min",
        eps_train=RELATIVE_GRID, eps_test=(0.0, 0.5, 1.0, 2.0),
        k_train=10, k_test=10, runs=200, models=(RF, NN1))


def synth_2d_fallback():
    return replace(synth_2d(), data=DataSource(source="synth", kind="diagonal_band", n=4000,
                                                noise=0.01, seed=2))


def external_2d():
    return ExperimentPlan(
        data=DataSource(source="csv"), split=SplitSpec(test_fraction=0.2), eps_units="eps_min",
        eps_train=RELATIVE_GRID, eps_test=(0.0, 0.5, 1.0, 1.5, 2.0),
        k_train=10, k_test=10, runs=1200, models=(RF, NN1))


def cifar10():
    return ExperimentPlan(
        data=DataSource(source="cifar10", include="both"), split=SplitSpec(test_fraction=1 / 6),
        eps_units="eps_min", eps_train=(0.0, 0.5, 1.0), eps_test=(0.0, 0.5, 1.0),
        k_train=1, k_test=1, runs=20, models=(RF, NN1), clip_to_unit=True)


PRESETS = {
    "synth-2d": synth_2d,
    "synth-2d-fallback": synth_2d_fallback,
    "external-2d": external_2d,
    "cifar10": cifar10,
}
