"""Predict D2D channel gains from cellular channel gains and measure the effect on RRM."""

__version__ = "0.1.0"

from .dataset import Dataset, NormStats, fit_norm, generate_dataset, split  # noqa: E402
from .evaluation import pearson  # noqa: E402
from .mlp import MlpModel, forward, forward_with_gradient, init_model, predict_gain  # noqa: E402
from .propagation import GainMatrixSet, RadioParams, compute_gain_matrices  # noqa: E402
from .rrm import (Mode, RrmConfig, allocate_channels_greedy, binary_power_control_greedy,  # noqa: E402
                  signaling_overhead, sum_capacity)
from .scenario import AreaConfig, Environment, Scenario, generate_scenario, wall_crossings  # noqa: E402
from .trainer import LmConfig, train  # noqa: E402

__all__ = [
    "AreaConfig", "Dataset", "Environment", "GainMatrixSet", "LmConfig", "MlpModel", "Mode", "NormStats",
    "RadioParams", "RrmConfig", "Scenario", "allocate_channels_greedy", "binary_power_control_greedy",
    "compute_gain_matrices", "fit_norm", "forward", "forward_with_gradient", "generate_dataset",
    "generate_scenario", "init_model", "pearson", "predict_gain", "signaling_overhead", "split",
    "sum_capacity", "train", "wall_crossings",
]
