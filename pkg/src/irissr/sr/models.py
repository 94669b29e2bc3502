"""SRCNN, VDCNN and SRGAN architectures."""

from __future__ import annotations

import math

import numpy as np

from ..nn import (BatchNorm2D, Conv2D, Dense, LeakyReLU, Network, PixelShuffle, PReLU, ReLU,
                  ResidualAdd, Sigmoid)

# valid-convolution margin lost on each side by SRCNN: (9 - 1)/2 + (5 - 1)/2
SRCNN_MARGIN = 6


def build_srcnn(seed: int = 0) -> Network:
    """9-1-5 SRCNN: 64 9x9 filters, 32 1x1 filters, one 5x5 filter, no padding."""
    return Network([
        Conv2D(1, 64, 9), ReLU(),
        Conv2D(64, 32, 1), ReLU(),
        Conv2D(32, 1, 5),
    ]).init(seed)


def build_vdcnn(depth: int = 20, width: int = 64, seed: int = 0, init: str = "looks_linear",
                init_noise: float = 0.1) -> Network:
    """``depth`` 3x3 convolutions with padding 1; the output is a residual.

    ``init="he"`` is plain He-uniform. The default ``"looks_linear"`` makes the
    stack start out as a near-identity: the first layer emits mirrored filter
    pairs ``[w, -w]`` so each ReLU pair keeps ``relu(z) - relu(-z) = z``, hidden
    layers are centre-tap identities on those pairs plus ``init_noise`` times
    He-scaled noise, and the last layer is zero (output = bicubic input).
    A 20-layer plain ReLU stack barely moves under SGD from He init.
    """
    if depth < 3:
        raise ValueError("vdcnn depth must be >= 3")
    if init not in ("he", "looks_linear"):
        raise ValueError(f"unknown vdcnn init {init!r}")
    if init == "looks_linear" and width % 2:
        raise ValueError("looks_linear init needs an even width")
    layers = [Conv2D(1, width, 3, padding=1), ReLU()]
    for _ in range(depth - 2):
        layers += [Conv2D(width, width, 3, padding=1), ReLU()]
    layers.append(Conv2D(width, 1, 3, padding=1))
    net = Network(layers).init(seed)
    if init == "looks_linear":
        _looks_linear(net, init_noise, np.random.default_rng(seed + 7919))
    return net


def _looks_linear(net: Network, noise: float, rng: np.random.Generator) -> None:
    convs = conv_layers(net)
    width = convs[0].out_ch
    h = width // 2
    first = convs[0].params
    first["weight"][h:] = -first["weight"][:h]
    first["bias"][:] = 0
    k = np.arange(h)
    for conv in convs[1:-1]:
        w = np.zeros_like(conv.params["weight"])
        w[k, k, 1, 1] = w[h + k, h + k, 1, 1] = 1
        w[k, h + k, 1, 1] = w[h + k, k, 1, 1] = -1
        w += noise * np.sqrt(2.0 / (9 * width)) * rng.standard_normal(w.shape).astype(np.float32)
        conv.params["weight"][:] = w
        conv.params["bias"][:] = 0
    convs[-1].params["weight"][:] = 0
    convs[-1].params["bias"][:] = 0


def build_generator(n_res_blocks: int = 16, factor: int = 4, width: int = 64, seed: int = 0) -> Network:
    if n_res_blocks < 1:
        raise ValueError("n_res_blocks must be >= 1")
    stages = int(round(math.log2(factor)))
    if 2**stages != factor or stages < 1:
        raise ValueError(f"generator factor must be a power of two, got {factor}")
    layers = [Conv2D(1, width, 9, padding=4), PReLU(width)]
    head = len(layers)  # activation index of the head output
    for _ in range(n_res_blocks):
        block_in = len(layers)
        layers += [Conv2D(width, width, 3, padding=1), BatchNorm2D(width), PReLU(width),
                   Conv2D(width, width, 3, padding=1), BatchNorm2D(width), ResidualAdd(block_in)]
    layers += [Conv2D(width, width, 3, padding=1), BatchNorm2D(width), ResidualAdd(head)]
    for _ in range(stages):
        layers += [Conv2D(width, 4 * width, 3, padding=1), PixelShuffle(2), PReLU(width)]
    layers.append(Conv2D(width, 1, 9, padding=4))
    return Network(layers).init(seed)


DISCRIMINATOR_STRIDES = (1, 2, 1, 2, 1, 2, 1, 2)
DISCRIMINATOR_MULTIPLIERS = (1, 1, 2, 2, 4, 4, 8, 8)


def build_discriminator(input_size: int = 96, base_channels: int = 64, dense_width: int = 1024,
                        seed: int = 0) -> Network:
    """Eight 3x3 convs (channels doubling base..8*base), then dense layers and a sigmoid."""
    if input_size % 16:
        raise ValueError("discriminator input size must be divisible by 16")
    layers = []
    c_in = 1
    for i, (s, m) in enumerate(zip(DISCRIMINATOR_STRIDES, DISCRIMINATOR_MULTIPLIERS)):
        c_out = base_channels * m
        layers.append(Conv2D(c_in, c_out, 3, stride=s, padding=1))
        if i > 0:
            layers.append(BatchNorm2D(c_out))
        layers.append(LeakyReLU(0.2))
        c_in = c_out
    spatial = input_size // 16
    layers += [Dense(c_in * spatial * spatial, dense_width), LeakyReLU(0.2),
               Dense(dense_width, 1), Sigmoid()]
    return Network(layers).init(seed)


def build_srgan(n_res_blocks: int = 16, factor: int = 4, width: int = 64, input_size: int = 96,
                disc_channels: int = 64, dense_width: int = 1024, seed: int = 0):
    """Return ``(generator, discriminator)``."""
    return (build_generator(n_res_blocks, factor, width, seed),
            build_discriminator(input_size, disc_channels, dense_width, seed + 1))


def conv_layers(net: Network) -> list[Conv2D]:
    return [layer for layer in net.layers if isinstance(layer, Conv2D)]
