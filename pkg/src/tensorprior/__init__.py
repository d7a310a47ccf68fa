"""Tensor completion with a sparse-attention Tucker prior."""
from .attention import attention_map, sparsemax, sparsemax_rows
from .baseline import tucker_als_complete
from .errors import ConfigError, NumericError, ShapeError
from .ft3d import read_ft3d, write_ft3d
from .metrics import evaluate_reconstruction, rmse, slnre
from .model import ModelConfig, ModelParams, forward, load_checkpoint, save_checkpoint
from .observation import ObservationSet
from .patches import extract, make_grid
from .train import TrainConfig, fit

__version__ = "0.1.0"

__all__ = [
    "attention_map", "sparsemax", "sparsemax_rows", "tucker_als_complete",
    "ConfigError", "NumericError", "ShapeError", "read_ft3d", "write_ft3d",
    "evaluate_reconstruction", "rmse", "slnre", "ModelConfig", "ModelParams", "forward",
    "load_checkpoint", "save_checkpoint", "ObservationSet", "extract", "make_grid",
    "TrainConfig", "fit",
]
