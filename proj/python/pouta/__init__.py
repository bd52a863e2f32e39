"""Python bindings for the pouta anomaly detection library."""

from ._pouta import (
    Detector,
    auroc,
    average_precision,
    default_config,
    evaluate,
    few_shot_subset,
    image_score,
    lr_at_epoch,
    parameter_count,
    perlin_mask,
    synthesize_anomaly,
    train,
    write_toy_fixture,
)

__all__ = [
    "Detector",
    "auroc",
    "average_precision",
    "default_config",
    "evaluate",
    "few_shot_subset",
    "image_score",
    "lr_at_epoch",
    "parameter_count",
    "perlin_mask",
    "synthesize_anomaly",
    "train",
    "write_toy_fixture",
]
