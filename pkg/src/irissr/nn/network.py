from __future__ import annotations

import numpy as np

from .layers import Layer, ResidualAdd


class NonFiniteError(FloatingPointError):
    """A NaN or Inf appeared in an activation, gradient or loss."""


def check_finite(arr: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {where}")


class Network:
    """Linear chain of layers with optional skip connections.

    Skip connections are ``ResidualAdd`` layers naming an earlier activation
    index (0 = network input, ``i + 1`` = output of layer ``i``). Channel
    compatibility is checked at construction; spatial agreement of skip
    endpoints is checked when the network runs.
    """

    def __init__(self, layers: list[Layer], in_channels: int = 1):
        self.layers = list(layers)
        self.in_channels = in_channels
        self.opt_state: dict = {}
        self._trained_input = None
        self.channels = self._check_topology()

    def _check_topology(self) -> list[int]:
        channels = [self.in_channels]
        for i, layer in enumerate(self.layers):
            c = channels[-1]
            if isinstance(layer, ResidualAdd):
                if not 0 <= layer.source <= i:
                    raise ValueError(f"layer {i}: skip source {layer.source} is not an earlier activation")
                if channels[layer.source] != c:
                    raise ValueError(f"layer {i}: skip from activation {layer.source} has "
                                     f"{channels[layer.source]} channels, expected {c}")
            channels.append(layer.out_channels(c))
        return channels

    def init(self, seed: int = 0) -> "Network":
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            layer.init(rng)
        self.opt_state = {}
        return self

    @property
    def dtype(self):
        for _, _, p in self.parameters():
            return p.dtype
        return np.dtype(np.float32)

    def astype(self, dtype) -> "Network":
        for layer in self.layers:
            layer.astype(dtype)
        self.opt_state = {}
        return self

    def parameters(self):
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                yield i, name, value

    def n_params(self) -> int:
        return int(sum(p.size for _, _, p in self.parameters()))

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim != 4:
            raise ValueError(f"expected a 4-D (n, c, h, w) tensor, got shape {x.shape}")
        if x.shape[1] != self.in_channels:
            raise ValueError(f"network expects {self.in_channels} input channels, got {x.shape[1]}")
        x = x.astype(self.dtype, copy=False)
        check_finite(x, "network input")
        acts = [x]
        for i, layer in enumerate(self.layers):
            if isinstance(layer, ResidualAdd):
                y = layer.forward(acts[-1], train, skip=acts[layer.source])
            else:
                y = layer.forward(acts[-1], train)
            check_finite(y, f"layer {i} ({layer.kind}) output")
            acts.append(y)
        self._trained_input = x.shape if train else None
        return acts[-1]

    __call__ = forward

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        """Populate every parameter gradient; return the input gradient."""
        if self._trained_input is None:
            raise RuntimeError("backward requires a preceding forward(train=True)")
        g = np.asarray(upstream, dtype=self.dtype)
        pending: dict[int, np.ndarray] = {}
        for i in range(len(self.layers) - 1, -1, -1):
            if i + 1 in pending:
                g = g + pending.pop(i + 1)
            layer = self.layers[i]
            if isinstance(layer, ResidualAdd):
                layer.backward(g)
                src = layer.source
                pending[src] = pending[src] + g if src in pending else g
            else:
                g = layer.backward(g)
            check_finite(g, f"gradient below layer {i} ({layer.kind})")
        if 0 in pending:
            g = g + pending.pop(0)
        return g

    def zero_grad(self) -> None:
        for layer in self.layers:
            for name in layer.grads:
                layer.grads[name] = None

    def __repr__(self):
        body = ",\n  ".join(repr(layer) for layer in self.layers)
        return f"Network(in_channels={self.in_channels}, [\n  {body}\n])"
