from elvc.neural.checkpoint import load_checkpoint, save_checkpoint
from elvc.neural.model import (
    MODES,
    LayerSpec,
    ModelConfig,
    ModelParameters,
    backward,
    build_model,
    convert,
    forward,
    fusion_weights,
)
from elvc.neural.train import TrainConfig, evaluate_mse, masked_mse, train

__all__ = [
    "MODES",
    "LayerSpec",
    "ModelConfig",
    "ModelParameters",
    "TrainConfig",
    "backward",
    "build_model",
    "convert",
    "evaluate_mse",
    "forward",
    "fusion_weights",
    "load_checkpoint",
    "masked_mse",
    "save_checkpoint",
    "train",
]
