"""Synthetic data-generating processes: the Gaussian study and a discrete oracle."""
from .data import Dataset, LabeledExample, read_dataset_csv, write_dataset_csv
from .discrete import (
    DiscreteDgp,
    ToySample,
    all_binary_hypotheses,
    augmented_risk_exact,
    bayes_classifier,
    bayes_xstar_classifier,
    counterfactual_distribution,
    default_toy,
    default_toy_tau,
    enumerate_and_evaluate,
    four_state_toy,
    pushforward_distribution,
    random_toy,
    sample_toy,
)
from .gaussian import (
    GaussianDgp,
    TableSamplingError,
    build_default_gaussian_dgp,
    make_gaussian_dgp,
    oracle_counterfactual,
    oracle_counterfactuals,
    sample_correlated_table,
    sample_dataset,
    sample_panel_dataset,
    select_dirichlet_alpha,
    treatment_effect,
)
from .policy import InterventionPolicy

__all__ = [
    "Dataset", "LabeledExample", "read_dataset_csv", "write_dataset_csv",
    "DiscreteDgp", "ToySample", "all_binary_hypotheses", "augmented_risk_exact",
    "bayes_classifier", "bayes_xstar_classifier", "counterfactual_distribution",
    "default_toy", "default_toy_tau", "enumerate_and_evaluate", "four_state_toy",
    "pushforward_distribution", "random_toy", "sample_toy",
    "GaussianDgp", "TableSamplingError", "build_default_gaussian_dgp", "make_gaussian_dgp",
    "oracle_counterfactual", "oracle_counterfactuals", "sample_correlated_table",
    "sample_dataset", "sample_panel_dataset", "select_dirichlet_alpha", "treatment_effect",
    "InterventionPolicy",
]
