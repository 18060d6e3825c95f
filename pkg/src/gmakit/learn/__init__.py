from .forest import RandomForest, rf_fit, rf_predict_proba
from .nn import ConvNet1D, LSTMNet, sigmoid
from .training import (
    FlatSample,
    TrainConfig,
    TrainingDiverged,
    bce,
    flatten,
    grad_check,
    load_model,
    predict,
    save_model,
    train,
)

__all__ = [
    "RandomForest",
    "rf_fit",
    "rf_predict_proba",
    "ConvNet1D",
    "LSTMNet",
    "sigmoid",
    "FlatSample",
    "TrainConfig",
    "TrainingDiverged",
    "bce",
    "flatten",
    "grad_check",
    "load_model",
    "predict",
    "save_model",
    "train",
]
