"""Multi-scale pooling forecaster with linear baselines and a full
from-scratch training, benchmarking, and profiling stack."""

from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    ShapeError,
    TrainingError,
)
from .fpn import FpnConfig, build_fpn, build_fpn_backward, level_lengths
from .models import (
    MODEL_KINDS,
    ModelConfig,
    build_model,
    count_macs,
    count_params,
    moving_average_decompose,
    stage_output_lengths,
)
from .trainer import (
    Checkpoint,
    TrainConfig,
    evaluate,
    load_checkpoint,
    quantize,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError", "ConfigError", "DataError", "ShapeError", "TrainingError",
    "FpnConfig", "build_fpn", "build_fpn_backward", "level_lengths",
    "MODEL_KINDS", "ModelConfig", "build_model", "count_macs", "count_params",
    "moving_average_decompose", "stage_output_lengths",
    "Checkpoint", "TrainConfig", "evaluate", "load_checkpoint", "quantize",
    "save_checkpoint", "train",
    "__version__",
]
