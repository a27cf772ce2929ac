"""Minimal reverse-mode tensor engine for the auto-encoder."""

from .tensor import Tensor, count_macs, debug_mode, no_grad
from .layers import (BatchNorm, Conv1d, Conv2dFirst, LayerSpec, Linear, Module, batchnorm,
                     conv1d, conv2d_first, hswish, linear, selu, sigmoid, softmax, tanh)
from .losses import ce_loss, combined_loss, mse_loss, q_loss, qfunc
from .optim import Adam, AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Tensor", "count_macs", "debug_mode", "no_grad", "BatchNorm", "Conv1d", "Conv2dFirst",
    "LayerSpec", "Linear", "Module", "batchnorm", "conv1d", "conv2d_first", "hswish", "linear",
    "selu", "sigmoid", "softmax", "tanh", "ce_loss", "combined_loss", "mse_loss", "q_loss",
    "qfunc", "Adam", "AdamState", "adam_step", "load_checkpoint", "save_checkpoint",
]
