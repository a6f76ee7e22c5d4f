"""Minimal reverse-mode autodiff with the layers and optimizer the beamforming nets need."""

from . import engine
from .engine import Node, backward, const, var
from .layers import conv2d, dense, glorot_uniform, lstm_cell, maxpool2d
from .params import (AdamConfig, ParameterSet, adam_step, finite_diff_gradient,
                     load_params, save_params)

__all__ = [
    "engine", "Node", "backward", "const", "var",
    "conv2d", "dense", "glorot_uniform", "lstm_cell", "maxpool2d",
    "AdamConfig", "ParameterSet", "adam_step", "finite_diff_gradient",
    "load_params", "save_params",
]
