"""Dependence measures, divergences, generalization bounds and OOD risk."""
from .bounds import (
    LAMBDA_VARIANTS,
    RENYI_DIRECTIONS,
    BoundReport,
    aug_bound,
    lambda_aug_joint,
    lambda_aug_excess,
    renyi_bound,
)
from .divergence import (
    corruption_tv,
    gaussian_corruption_divergences,
    normal_cdf,
    truncated_xi_quadrature,
    tv_discrete,
    tv_gaussian_mc,
    tv_gaussian_shared_cov,
)
from .risk import McAccuracy, bayes_xstar_model, merge_mc, ood_accuracy_exact, ood_risk_mc
from .tables import (
    JointTable,
    ZeroMarginalError,
    importance_divergence,
    mutual_information,
    renyi_dependence,
)

__all__ = [
    "LAMBDA_VARIANTS", "RENYI_DIRECTIONS", "BoundReport", "aug_bound", "lambda_aug_joint", "lambda_aug_excess",
    "renyi_bound",
    "corruption_tv", "gaussian_corruption_divergences", "normal_cdf", "truncated_xi_quadrature",
    "tv_discrete", "tv_gaussian_mc", "tv_gaussian_shared_cov",
    "McAccuracy", "bayes_xstar_model", "merge_mc", "ood_accuracy_exact", "ood_risk_mc",
    "JointTable", "ZeroMarginalError", "importance_divergence", "mutual_information",
    "renyi_dependence",
]
