from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .network import Network, check_finite


@dataclass
class SGDConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    grad_clip: float | None = None
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    lr_decay: float = 1.0  # multiplicative learning-rate factor per epoch

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ValueError("grad_clip must be positive or None")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def at_epoch(self, epoch: int) -> "SGDConfig":
        """Copy with the learning rate decayed for ``epoch`` (0-based)."""
        return replace(self, learning_rate=self.learning_rate * self.lr_decay**epoch)


def sgd_step(net: Network, cfg: SGDConfig) -> Network:
    """One momentum-SGD update from the populated gradients, then clear them.

    ``v <- momentum * v - lr * (g + weight_decay * w)``; ``w <- w + v``.
    With ``grad_clip`` set each gradient tensor is rescaled to at most that
    L2 norm before the update. Velocities live in ``net.opt_state``.
    """
    entries = []
    for i, layer in enumerate(net.layers):
        for name in layer.params:
            g = layer.grads.get(name)
            if g is None:
                raise RuntimeError(f"layer {i} ({layer.kind}).{name} has no gradient; run backward first")
            entries.append((i, layer, name, g))
    if not entries:
        raise RuntimeError("network has no learnable parameters")
    for i, layer, name, g in entries:
        w = layer.params[name]
        g = g.astype(np.float64)
        if cfg.grad_clip is not None:
            norm = float(np.sqrt(np.sum(g * g)))
            if norm > cfg.grad_clip:
                g *= cfg.grad_clip / norm
        if cfg.weight_decay:
            g = g + cfg.weight_decay * w
        key = (i, name)
        v = net.opt_state.get(key)
        v = -cfg.learning_rate * g if v is None else cfg.momentum * v - cfg.learning_rate * g
        check_finite(v, f"update of layer {i}.{name}")
        net.opt_state[key] = v
        layer.params[name] = (w + v).astype(w.dtype)
        layer.grads[name] = None
    return net
