"""Minimal 1-D convolutional network core with hand-written backprop."""
from ._backend import BACKEND
from .gradcheck import gradient_check, mse_loss
from .layers import BatchNorm, Conv1D, Dense, Dropout, GlobalAvgPool, MaxPool1D, ReLU, ShapeError
from .network import Sequential
from .optim import (Adam, AdamState, EarlyStopConfig, EarlyStopping, NonFiniteGradientError,
                    OptimizerConfig, adam_step)

__all__ = [
    "BACKEND", "gradient_check", "mse_loss", "BatchNorm", "Conv1D", "Dense", "Dropout",
    "GlobalAvgPool", "MaxPool1D", "ReLU", "ShapeError", "Sequential", "Adam", "AdamState",
    "EarlyStopConfig", "EarlyStopping", "NonFiniteGradientError", "OptimizerConfig", "adam_step",
]
