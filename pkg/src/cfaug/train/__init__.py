"""Linear classifiers trained under ERM, augmentation, reweighting and invariance objectives."""
from .fit import EvalResult, FitInfo, NonFiniteLossError, TrainConfig, evaluate, fit
from .model import LinearModel, score_width
from .objectives import (
    OBJECTIVES,
    EmptyCellError,
    EmptyEnvironmentError,
    GroupTooSmallError,
    Objective,
    group_dro_state_update,
    irm_scale_gradients,
    irmv1_penalty,
    median_bandwidth,
    mmd_penalty,
    objective_value_and_grad,
    per_example_loss,
    prepare,
    reweighting_weights,
)

__all__ = [
    "EvalResult", "FitInfo", "NonFiniteLossError", "TrainConfig", "evaluate", "fit",
    "LinearModel", "score_width",
    "OBJECTIVES", "EmptyCellError", "EmptyEnvironmentError", "GroupTooSmallError", "Objective",
    "group_dro_state_update", "irm_scale_gradients", "irmv1_penalty", "median_bandwidth",
    "mmd_penalty", "objective_value_and_grad", "per_example_loss", "prepare",
    "reweighting_weights",
]
