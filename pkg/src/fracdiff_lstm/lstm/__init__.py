from .estimator import LSTMRegressor
from .network import (
    LstmCellParams,
    LstmNetwork,
    backward,
    cell_step,
    forward,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    DEFAULT_SPACE,
    ModelSpec,
    Predictions,
    TrainConfig,
    TuneResult,
    fit,
    predict_series,
    train_network,
    tune,
)

__all__ = [
    "DEFAULT_SPACE",
    "LSTMRegressor",
    "LstmCellParams",
    "LstmNetwork",
    "ModelSpec",
    "Predictions",
    "TrainConfig",
    "TuneResult",
    "backward",
    "cell_step",
    "fit",
    "forward",
    "load_checkpoint",
    "predict_series",
    "save_checkpoint",
    "train_network",
    "tune",
]
