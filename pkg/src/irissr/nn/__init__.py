"""Minimal NCHW convolutional network engine: forward, backward, SGD."""

from .layers import (BatchNorm2D, Conv2D, Dense, Layer, LeakyReLU, PixelShuffle, PReLU, ReLU,
                     ResidualAdd, Sigmoid, pixel_shuffle, pixel_unshuffle)
from .loss import bce_loss, bce_with_logits, mse_loss
from .network import Network, NonFiniteError
from .optim import SGDConfig, sgd_step
from .serialize import load_network, read_container, save_network, write_container

__all__ = [
    "BatchNorm2D", "Conv2D", "Dense", "Layer", "LeakyReLU", "PixelShuffle", "PReLU", "ReLU",
    "ResidualAdd", "Sigmoid", "pixel_shuffle", "pixel_unshuffle", "bce_loss", "bce_with_logits",
    "mse_loss", "Network", "NonFiniteError", "SGDConfig", "sgd_step", "load_network",
    "read_container", "save_network", "write_container",
]
