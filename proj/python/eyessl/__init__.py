"""Semi-supervised eye segmentation: numpy-facing wrappers over the C++ core."""

import json

from ._eyessl import (
    Config,
    ConfigError,
    Error,
    IoError,
    Model,
    NumericError,
    ParameterError,
    ShapeError,
    ValidationError,
    apply_spatial,
    boundary_weight_map,
    clahe,
    config_keys,
    consistency_loss,
    cross_entropy,
    gamma_correct,
    generate_synthetic,
    invert_spatial,
    iou,
    mean_iou,
    render_report,
    schedule,
    signed_distance,
    supervised_loss,
)
from ._eyessl import _train


def config(**entries):
    """Config with the given entries applied as overrides."""
    cfg = Config()
    for key, value in entries.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        cfg.set(key, str(value))
    cfg.validate()
    return cfg


def train(cfg, checkpoint=None, max_steps=None):
    """Train on the data the config describes. Returns (model, history records)."""
    model, jsonl = _train(cfg, checkpoint, max_steps)
    return model, [json.loads(line) for line in jsonl.splitlines() if line]


__all__ = [
    "Config",
    "ConfigError",
    "Error",
    "IoError",
    "Model",
    "NumericError",
    "ParameterError",
    "ShapeError",
    "ValidationError",
    "apply_spatial",
    "boundary_weight_map",
    "clahe",
    "config",
    "config_keys",
    "consistency_loss",
    "cross_entropy",
    "gamma_correct",
    "generate_synthetic",
    "invert_spatial",
    "iou",
    "mean_iou",
    "render_report",
    "schedule",
    "signed_distance",
    "supervised_loss",
    "train",
]
