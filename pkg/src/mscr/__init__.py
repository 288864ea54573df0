"""Corruption robustness evaluation at the minimal class-separation radius."""
from ._version import __version__
from .augmentation import AugmentationConfig, augment, sample_ball
from .classifiers import ModelSpec, predict, train
from .dataset import Dataset, SplitSpec, from_arrays, load_cifar10_binary, load_csv, split, synth_2d
from .errors import (ConfigError, DatasetError, MSCRError, RunError, UndefinedMSCRError,
                     UndefinedSeparationError, ValidationError)
from .experiment import (DataSource, ExperimentPlan, k_convergence_study, optima_report, run_experiment,
                         tradeoff_curve)
from .metrics import accuracy, mean_ci, mscr
from .norms import Norm
from .separation import SeparationResult, min_class_separation

__all__ = [
    "__version__", "AugmentationConfig", "augment", "sample_ball", "ModelSpec", "predict", "train",
    "Dataset", "SplitSpec", "from_arrays", "load_cifar10_binary", "load_csv", "split", "synth_2d",
    "ConfigError", "DatasetError", "MSCRError", "RunError", "UndefinedMSCRError",
    "UndefinedSeparationError", "ValidationError", "DataSource", "ExperimentPlan",
    "k_convergence_study", "optima_report", "run_experiment", "tradeoff_curve", "accuracy", "mean_ci",
    "mscr", "Norm", "SeparationResult", "min_class_separation",
]
