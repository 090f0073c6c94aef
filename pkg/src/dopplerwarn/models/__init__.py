"""From-scratch LSTM and CNN event classifiers."""

from .cnn import CnnConfig, CnnNetwork
from .core import (
    ModelConfig,
    TrainedModel,
    cnn_forward,
    forward,
    gradient_check,
    initial_model,
    load_model,
    loss_and_grad,
    lstm_forward,
    network_for,
    predict,
    save_model,
    train,
)
from .lstm import LstmConfig, LstmNetwork

__all__ = [
    "CnnConfig",
    "CnnNetwork",
    "LstmConfig",
    "LstmNetwork",
    "ModelConfig",
    "TrainedModel",
    "cnn_forward",
    "forward",
    "gradient_check",
    "initial_model",
    "load_model",
    "loss_and_grad",
    "lstm_forward",
    "network_for",
    "predict",
    "save_model",
    "train",
]
