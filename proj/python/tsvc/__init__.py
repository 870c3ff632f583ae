"""Tri-model training for image-text matching under noisy correspondence."""

from ._core import (
    DegenerateInput,
    FormatError,
    GmmModel,
    adaptive_margin,
    change_rates,
    entropy,
    fit_gmm,
    mutual_information,
    partition,
    posterior_clean,
    recall_at_k,
    report,
    soft_label,
    train_on_file,
    write_synthetic_dataset,
)

__all__ = [
    "DegenerateInput",
    "FormatError",
    "GmmModel",
    "adaptive_margin",
    "change_rates",
    "entropy",
    "fit_gmm",
    "mutual_information",
    "partition",
    "posterior_clean",
    "recall_at_k",
    "report",
    "soft_label",
    "train_on_file",
    "write_synthetic_dataset",
]
